#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aglab/netmodel.hpp"

namespace aglab {

inline constexpr char kCheckpointMagic[4] = {'A', 'G', 'L', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EmaSnapshot {
    double sigma_rel = 0.0;
    double exponent = 0.0;
    ModelParams params;
};

/// Binary checkpoint, little-endian throughout:
///   "AGLB" u32 version
///   i32 width, i32 hidden_layers, u8 head, i32 class_count, f64 sigma_data
///   u64 step
///   u32 layer_count, per layer: u32 rows, u32 cols, f64[rows*cols] row-major
///   f64 output_gain
///   u32 rng_len, rng state text (std::mt19937_64 stream form)
///   u32 ema_count, per table: f64 sigma_rel, f64 exponent, weights as above, f64 gain
struct Checkpoint {
    ModelParams params;
    std::uint64_t step = 0;
    std::string rng_state;
    std::vector<EmaSnapshot> ema;

    /// EMA table for sigma_rel (exact match within 1e-12), or the raw params when
    /// sigma_rel <= 0.
    const ModelParams& select(double sigma_rel) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace aglab
