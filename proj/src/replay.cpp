#include "keepout/replay.hpp"

#include <zlib.h>

#include "keepout/checkpoint.hpp"
#include "keepout/error.hpp"

namespace keepout {

namespace {
constexpr std::uint32_t kBufferFormatVersion = 1;
} // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity),
      obs_(obs_dim, capacity),
      act_(act_dim, capacity),
      next_obs_(obs_dim, capacity),
      rew_(capacity),
      done_(capacity) {
    if (capacity == 0) throw ValidationError("replay capacity must be positive");
}

void ReplayBuffer::push(const Vec& obs, const Vec& action, double reward,
                        const Vec& next_obs, bool done) {
    obs_.col(head_) = obs;
    act_.col(head_) = action;
    next_obs_.col(head_) = next_obs;
    rew_[head_] = reward;
    done_[head_] = done ? 1.0 : 0.0;
    head_ = (head_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

void ReplayBuffer::sample(Rng& rng, int batch, Mat& obs, Mat& act, Vec& rew,
                          Mat& next_obs, Vec& done) const {
    if (static_cast<std::size_t>(batch) > size_) {
        throw ValidationError("replay sample larger than buffer occupancy");
    }
    obs.resize(obs_.rows(), batch);
    act.resize(act_.rows(), batch);
    next_obs.resize(next_obs_.rows(), batch);
    rew.resize(batch);
    done.resize(batch);
    for (int b = 0; b < batch; ++b) {
        const auto i = static_cast<Eigen::Index>(rng.uniform_index(size_));
        obs.col(b) = obs_.col(i);
        act.col(b) = act_.col(i);
        next_obs.col(b) = next_obs_.col(i);
        rew[b] = rew_[i];
        done[b] = done_[i];
    }
}

void ReplayBuffer::transition(std::size_t i, Vec& obs, Vec& act, double& rew,
                              Vec& next_obs, double& done) const {
    if (i >= size_) throw ValidationError("replay transition index out of range");
    obs = obs_.col(i);
    act = act_.col(i);
    next_obs = next_obs_.col(i);
    rew = rew_[i];
    done = done_[i];
}

void ReplayBuffer::save(const std::string& path) const {
    nlohmann::ordered_json meta;
    meta["capacity"] = capacity_;
    meta["size"] = size_;
    meta["head"] = head_;
    meta["obs_dim"] = obs_dim();
    meta["act_dim"] = act_dim();
    EnvelopeWriter w("SRPB", kBufferFormatVersion, meta);
    const auto n = static_cast<std::size_t>(size_);
    w.add_blob(obs_.data(), n * obs_.rows());
    w.add_blob(act_.data(), n * act_.rows());
    w.add_blob(next_obs_.data(), n * next_obs_.rows());
    w.add_blob(rew_.data(), n);
    w.add_blob(done_.data(), n);
    w.write(path);
}

ReplayBuffer ReplayBuffer::load(const std::string& path) {
    EnvelopeReader r = EnvelopeReader::open(path, "SRPB");
    if (r.version() != kBufferFormatVersion) {
        throw IoError("unsupported replay-buffer format version");
    }
    const auto& meta = r.meta();
    ReplayBuffer buf(meta.at("capacity").get<std::size_t>(),
                     meta.at("obs_dim").get<int>(), meta.at("act_dim").get<int>());
    buf.size_ = meta.at("size").get<std::size_t>();
    buf.head_ = meta.at("head").get<std::size_t>();
    if (buf.size_ > buf.capacity_ || buf.head_ >= buf.capacity_ ||
        (buf.size_ < buf.capacity_ && buf.head_ != buf.size_)) {
        throw IoError("inconsistent replay-buffer metadata");
    }
    const auto n = static_cast<std::size_t>(buf.size_);
    r.read_blob(buf.obs_.data(), n * buf.obs_.rows());
    r.read_blob(buf.act_.data(), n * buf.act_.rows());
    r.read_blob(buf.next_obs_.data(), n * buf.next_obs_.rows());
    r.read_blob(buf.rew_.data(), n);
    r.read_blob(buf.done_.data(), n);
    r.expect_consumed();
    return buf;
}

std::uint32_t ReplayBuffer::contents_hash() const {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    auto feed = [&crc](const double* p, std::size_t n) {
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(p),
                      static_cast<uInt>(n * sizeof(double)));
    };
    feed(obs_.data(), size_ * obs_.rows());
    feed(act_.data(), size_ * act_.rows());
    feed(next_obs_.data(), size_ * next_obs_.rows());
    feed(rew_.data(), size_);
    feed(done_.data(), size_);
    return static_cast<std::uint32_t>(crc);
}

} // namespace keepout
