#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rd2v/parameters.hpp"

namespace rd2v {

inline constexpr char kCheckpointMagic[4] = {'R', 'D', '2', 'V'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On-disk layout, all integers little-endian:
///
///   "RD2V"                    4 bytes
///   format version            u32
///   config digest             u64
///   step                      i64   (optimizer updates taken)
///   seed                      u64   (per-step streams derive from seed + step)
///   config JSON length        u64, then that many UTF-8 bytes
///   blob count                u64
///   blobs, each:
///     name length             u32, then the name bytes
///     rows, cols              u64, u64
///     values                  rows*cols IEEE-754 binary64, row-major
///
/// Blob names are prefixed "student/", "teacher/", "adam.m/" and "adam.v/".
struct Checkpoint {
  ParameterSet student;
  ParameterSet teacher;
  ParameterSet adam_m;
  ParameterSet adam_v;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
  std::string config_json;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t step);

} // namespace rd2v
