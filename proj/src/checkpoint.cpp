#include "mopac/checkpoint.hpp"

#include <fstream>

#include "mopac/errors.hpp"

namespace mopac {

namespace {

constexpr std::uint32_t kMagic = 0x4d4f5043u; // "MOPC"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ContractViolation("load_checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    if (n > 4096) throw ContractViolation("load_checkpoint: oversized string");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ContractViolation("load_checkpoint: truncated file");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractViolation("save_checkpoint: cannot open " + path);
    write_pod(out, kMagic);
    write_pod(out, kVersion);
    write_string(out, ckpt.env_id);
    write_string(out, algorithm_name(ckpt.algorithm));
    write_pod<std::int32_t>(out, ckpt.epoch);
    write_pod<std::int64_t>(out, ckpt.env_steps);
    write_pod<double>(out, ckpt.gamma);
    write_pod<std::int32_t>(out, ckpt.mpr.n_traj);
    write_pod<std::int32_t>(out, ckpt.mpr.h_min);
    write_pod<std::int32_t>(out, ckpt.mpr.h_max);
    write_pod<double>(out, ckpt.mpr.anneal_fraction);
    write_pod<double>(out, ckpt.mpr.lambda);
    write_pod<double>(out, ckpt.mpr.noise_scale);
    write_pod<std::int32_t>(out, ckpt.mpr.rollout_batch);
    save_actor_critic(out, ckpt.agent);
    write_pod<std::uint8_t>(out, ckpt.model ? 1 : 0);
    if (ckpt.model) ckpt.model->save(out);
    if (!out) throw ContractViolation("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractViolation("load_checkpoint: cannot open " + path);
    if (read_pod<std::uint32_t>(in) != kMagic)
        throw ContractViolation("load_checkpoint: bad magic in " + path);
    if (read_pod<std::uint32_t>(in) != kVersion)
        throw ContractViolation("load_checkpoint: unsupported version in " + path);
    Checkpoint ckpt;
    ckpt.env_id = read_string(in);
    ckpt.algorithm = algorithm_from_name(read_string(in));
    ckpt.epoch = read_pod<std::int32_t>(in);
    ckpt.env_steps = read_pod<std::int64_t>(in);
    ckpt.gamma = read_pod<double>(in);
    ckpt.mpr.n_traj = read_pod<std::int32_t>(in);
    ckpt.mpr.h_min = read_pod<std::int32_t>(in);
    ckpt.mpr.h_max = read_pod<std::int32_t>(in);
    ckpt.mpr.anneal_fraction = read_pod<double>(in);
    ckpt.mpr.lambda = read_pod<double>(in);
    ckpt.mpr.noise_scale = read_pod<double>(in);
    ckpt.mpr.rollout_batch = read_pod<std::int32_t>(in);
    ckpt.agent = load_actor_critic(in);
    if (read_pod<std::uint8_t>(in) != 0) ckpt.model = EnsembleModel::load(in);
    return ckpt;
}

} // namespace mopac
