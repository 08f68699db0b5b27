#ifndef MOPAC_REPLAY_HPP
#define MOPAC_REPLAY_HPP

#include <string>
#include <vector>

#include "mopac/envs.hpp"
#include "mopac/rng.hpp"

namespace mopac {

// Fixed-capacity ring of transitions with FIFO eviction.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

    void push(const Transition& t);
    std::size_t size() const { return count_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return count_ == 0; }
    // Uniform with replacement; sampled transitions are copies.
    Transition sample_one(Rng& rng) const;
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;
    // Contents in insertion order (oldest first).
    std::vector<Transition> all() const;
    const Transition& at(std::size_t logical_index) const; // 0 = oldest
    void clear();

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }

    // Debugging dump, flat binary.
    void dump(const std::string& path) const;

private:
    std::size_t capacity_;
    int state_dim_;
    int action_dim_;
    std::vector<Transition> storage_;
    std::size_t write_index_ = 0;
    std::size_t count_ = 0;
};

// Draws gradient batches mixed from the environment and model buffers with an
// exact per-batch composition of round(real_ratio * B) environment samples.
struct MixedSampler {
    const ReplayBuffer* env_buffer = nullptr;
    const ReplayBuffer* model_buffer = nullptr;
    double real_ratio = 0.05;

    std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;
};

} // namespace mopac

#endif
