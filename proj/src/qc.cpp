#include "zoo/qc.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace zoo::qc {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Basic: return "basic";
    case Phase::Extended: return "extended";
    case Phase::Final: return "final";
    case Phase::Failed: return "failed";
  }
  return "?";
}

Phase phase_from_name(std::string_view s) {
  if (s == "basic") return Phase::Basic;
  if (s == "extended") return Phase::Extended;
  if (s == "final") return Phase::Final;
  if (s == "failed") return Phase::Failed;
  throw Error("unknown phase: " + std::string(s));
}

void QcPolicy::validate() const {
  if (psnr_threshold < 0.0) throw Error("qc policy: threshold must be non-negative");
  if (basic_iters == 0) throw Error("qc policy: basic_iters must be positive");
  if (extended_multiplier < 1 || final_cap_multiplier < 1) {
    throw Error("qc policy: multipliers must be at least 1");
  }
}

std::size_t QcPolicy::interval() const {
  if (check_interval > 0) return check_interval;
  return std::max<std::size_t>(basic_iters / 10, 1);
}

std::pair<inr::Inr2d, QcRecord> run_three_phase(const inr::ImageGrid& img,
                                                const inr::Arch& arch, const QcPolicy& policy,
                                                std::uint64_t seed, std::string id) {
  policy.validate();
  inr::Fitter fitter(img, arch, seed);
  QcRecord rec;
  rec.id = std::move(id);

  auto met = [&](double p) { return p >= policy.psnr_threshold; };

  fitter.run_phase(policy.basic_iters, policy.lr0, policy.lr_min);
  double p = fitter.current_psnr();
  if (met(p)) {
    rec.phase = Phase::Basic;
  } else {
    std::size_t budget = policy.extended_multiplier * policy.basic_iters;
    fitter.run_phase(budget, policy.lr0, policy.lr_min, policy.interval(), met);
    p = fitter.current_psnr();
    if (met(p)) {
      rec.phase = Phase::Extended;
    } else {
      budget = policy.final_cap_multiplier * policy.basic_iters;
      fitter.run_phase(budget, policy.lr0, policy.lr_min, policy.interval(), met);
      p = fitter.current_psnr();
      rec.phase = met(p) ? Phase::Final : Phase::Failed;
    }
  }
  rec.final_psnr = p;
  rec.iterations_used = fitter.total_iterations();
  rec.passed = met(p);
  return {fitter.model(), rec};
}

std::vector<std::string> filter_scenes(const std::vector<SceneRecord>& records) {
  std::map<std::string, std::size_t> kept_per_class;
  for (const SceneRecord& r : records) {
    if (r.novel_view_psnr >= kSceneFloorDb) ++kept_per_class[r.class_id];
  }
  std::vector<std::string> kept;
  for (const SceneRecord& r : records) {
    if (r.novel_view_psnr < kSceneFloorDb) continue;
    if (kept_per_class[r.class_id] < kMinScenesPerClass) continue;
    kept.push_back(r.scene_id);
  }
  return kept;
}

DatasetStats dataset_stats(const std::vector<std::pair<std::string, double>>& class_psnr) {
  DatasetStats out;
  std::map<std::string, std::vector<double>> by_class;
  double total = 0.0, total_sq = 0.0;
  for (const auto& [cls, p] : class_psnr) {
    by_class[cls].push_back(p);
    total += p;
    total_sq += p * p;
  }
  out.count = class_psnr.size();
  if (out.count > 0) {
    double n = static_cast<double>(out.count);
    out.overall_mean = total / n;
    out.overall_std = std::sqrt(std::max(total_sq / n - out.overall_mean * out.overall_mean, 0.0));
  }
  for (const auto& [cls, vals] : by_class) {
    ClassStats cs;
    cs.class_id = cls;
    cs.count = vals.size();
    double s = 0.0, sq = 0.0;
    for (double v : vals) {
      s += v;
      sq += v * v;
    }
    double n = static_cast<double>(vals.size());
    cs.mean = s / n;
    cs.stddev = std::sqrt(std::max(sq / n - cs.mean * cs.mean, 0.0));
    out.per_class.push_back(std::move(cs));
  }
  return out;
}

}  // namespace zoo::qc
