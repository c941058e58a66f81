#pragma once

#include <cstdint>
#include <string>

#include "keepout/net.hpp"

namespace keepout {

// Uniform-replay ring buffer with FIFO overwrite. Column i of each matrix is
// transition i in storage order.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

    void push(const Vec& obs, const Vec& action, double reward, const Vec& next_obs,
              bool done);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    int obs_dim() const { return static_cast<int>(obs_.rows()); }
    int act_dim() const { return static_cast<int>(act_.rows()); }

    // Uniform with replacement. Fills the caller's preallocated batch
    // matrices (obs_dim x B etc.).
    void sample(Rng& rng, int batch, Mat& obs, Mat& act, Vec& rew, Mat& next_obs,
                Vec& done) const;

    // Direct access for tests.
    void transition(std::size_t i, Vec& obs, Vec& act, double& rew, Vec& next_obs,
                    double& done) const;

    void save(const std::string& path) const;
    static ReplayBuffer load(const std::string& path);

    // CRC32 over the occupied storage, for round-trip checks.
    std::uint32_t contents_hash() const;

private:
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t head_ = 0; // next write slot
    Mat obs_, act_, next_obs_;
    Vec rew_, done_;
};

} // namespace keepout
