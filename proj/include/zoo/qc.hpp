#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zoo/inr2d.hpp"

namespace zoo::qc {

enum class Phase { Basic, Extended, Final, Failed };

const char* phase_name(Phase p);
Phase phase_from_name(std::string_view s);

struct QcRecord {
  std::string id;
  Phase phase = Phase::Basic;
  std::size_t iterations_used = 0;
  double final_psnr = 0.0;
  bool passed = false;
};

struct QcPolicy {
  double psnr_threshold = 30.0;
  std::size_t basic_iters = 1000;
  std::size_t extended_multiplier = 3;
  std::size_t final_cap_multiplier = 10;
  // 0 means basic_iters / 10 (and at least 1).
  std::size_t check_interval = 0;
  double lr0 = 1e-3;
  double lr_min = 1e-5;
  void validate() const;
  std::size_t interval() const;
  std::size_t max_total_iters() const {
    return basic_iters * (1 + extended_multiplier + final_cap_multiplier);
  }
};

// Fit-until-threshold pipeline: a basic phase, an early-stopping extended
// phase of up to extended_multiplier x the basic budget, then a final phase
// that trains until the threshold or the hard cap (recorded as Failed).
// Each phase restarts the optimizer and the cosine schedule over its budget.
std::pair<inr::Inr2d, QcRecord> run_three_phase(const inr::ImageGrid& img,
                                                const inr::Arch& arch, const QcPolicy& policy,
                                                std::uint64_t seed, std::string id);

struct SceneRecord {
  std::string scene_id;
  std::string class_id;
  double novel_view_psnr = 0.0;
};

// Drops scenes below 25 dB, then drops every class left with fewer than five
// scenes. Keeps input order.
std::vector<std::string> filter_scenes(const std::vector<SceneRecord>& records);
inline constexpr double kSceneFloorDb = 25.0;
inline constexpr std::size_t kMinScenesPerClass = 5;

struct ClassStats {
  std::string class_id;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct DatasetStats {
  std::vector<ClassStats> per_class;  // ordered by class id
  std::size_t count = 0;
  double overall_mean = 0.0;
  double overall_std = 0.0;
};

DatasetStats dataset_stats(const std::vector<std::pair<std::string, double>>& class_psnr);

}  // namespace zoo::qc
