#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inspire/bspline.hpp"
#include "inspire/engine.hpp"
#include "inspire/image.hpp"
#include "inspire/synth.hpp"

namespace inspire {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class VolumeDtype { kU8, kU16, kF32 };

struct VolumeHeader {
  int dim = 2;
  VecI sizes;
  Vec spacing;
  VolumeDtype dtype = VolumeDtype::kF32;
  std::string datafile;
};

// Detached text header + raw little-endian data. 2D binary PGM (P5) is also
// accepted on read; 16-bit PGM samples are big-endian per the format.
FuzzyImage read_volume(const std::filesystem::path& header_path);
void write_volume(const FuzzyImage& img, const std::filesystem::path& header_path,
                  VolumeDtype dtype = VolumeDtype::kF32);

// Text header (counts, support, spacing) + raw little-endian f64 controls.
BSplineField read_field(const std::filesystem::path& header_path);
void write_field(const BSplineField& field, const std::filesystem::path& header_path);

RegistrationConfig parse_config(const std::filesystem::path& path);
RegistrationConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");
std::string serialize_config(const RegistrationConfig& cfg);

DeformationRecipe parse_recipe(const std::filesystem::path& path, uint64_t seed);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<IterationMetrics>& trace);

}  // namespace inspire
