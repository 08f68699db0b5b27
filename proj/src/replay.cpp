#include "mopac/replay.hpp"

#include <cmath>
#include <fstream>

#include "mopac/errors.hpp"

namespace mopac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
    if (capacity == 0) throw ContractViolation("ReplayBuffer: capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 20));
}

void ReplayBuffer::push(const Transition& t) {
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
        t.action.size() != action_dim_)
        throw ContractViolation("ReplayBuffer::push: transition dims do not match buffer");
    if (!std::isfinite(t.reward))
        throw ContractViolation("ReplayBuffer::push: non-finite reward");
    if (count_ < capacity_) {
        storage_.push_back(t);
        count_ += 1;
    } else {
        storage_[write_index_] = t;
    }
    write_index_ = (write_index_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t logical_index) const {
    if (logical_index >= count_)
        throw ContractViolation("ReplayBuffer::at: index out of range");
    if (count_ < capacity_) return storage_[logical_index];
    return storage_[(write_index_ + logical_index) % capacity_];
}

Transition ReplayBuffer::sample_one(Rng& rng) const {
    if (count_ == 0) throw EmptyBufferError("ReplayBuffer::sample_one: buffer is empty");
    return storage_[rng.index(count_)];
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(rng));
    return out;
}

std::vector<Transition> ReplayBuffer::all() const {
    std::vector<Transition> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < count_; ++i) out.push_back(at(i));
    return out;
}

void ReplayBuffer::clear() {
    storage_.clear();
    write_index_ = 0;
    count_ = 0;
}

void ReplayBuffer::dump(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractViolation("ReplayBuffer::dump: cannot open " + path);
    const std::uint64_t n = count_;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    const std::int32_t sd = state_dim_, ad = action_dim_;
    out.write(reinterpret_cast<const char*>(&sd), sizeof(sd));
    out.write(reinterpret_cast<const char*>(&ad), sizeof(ad));
    for (std::size_t i = 0; i < count_; ++i) {
        const Transition& t = at(i);
        out.write(reinterpret_cast<const char*>(t.state.data()), sd * sizeof(double));
        out.write(reinterpret_cast<const char*>(t.action.data()), ad * sizeof(double));
        out.write(reinterpret_cast<const char*>(&t.reward), sizeof(double));
        out.write(reinterpret_cast<const char*>(t.next_state.data()), sd * sizeof(double));
        const std::uint8_t d = t.done ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
}

std::vector<Transition> MixedSampler::sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) throw ContractViolation("MixedSampler: batch_size must be >= 1");
    const bool env_ok = env_buffer && !env_buffer->empty();
    const bool model_ok = model_buffer && !model_buffer->empty();
    if (!env_ok && !model_ok)
        throw EmptyBufferError("MixedSampler: both buffers are empty");
    std::size_t n_env;
    if (!model_ok) {
        n_env = batch_size;
    } else if (!env_ok) {
        n_env = 0;
    } else {
        n_env = static_cast<std::size_t>(
            std::llround(real_ratio * static_cast<double>(batch_size)));
        n_env = std::min(n_env, batch_size);
    }
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < n_env; ++i) batch.push_back(env_buffer->sample_one(rng));
    for (std::size_t i = n_env; i < batch_size; ++i)
        batch.push_back(model_buffer->sample_one(rng));
    return batch;
}

} // namespace mopac
