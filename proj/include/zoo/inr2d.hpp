#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "zoo/optim.hpp"
#include "zoo/tape.hpp"

namespace zoo::inr {

struct NormConstants {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> stdev{0.229, 0.224, 0.225};
  void validate() const;
};

// H x W x 3 image, values in [0, 1], row-major by (row, col, channel).
struct ImageGrid {
  std::size_t height = 0, width = 0;
  std::vector<double> rgb;

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0.0) {}

  double& at(std::size_t i, std::size_t j, std::size_t c) {
    return rgb[(i * width + j) * 3 + c];
  }
  double at(std::size_t i, std::size_t j, std::size_t c) const {
    return rgb[(i * width + j) * 3 + c];
  }
  std::size_t pixels() const { return height * width; }
};

// Sine-activated MLP from 2-d coordinates to 3 normalized channel values.
// weights[l] is (in x out) row-major, biases[l] is (out). Hidden layers apply
// sin(w0 * z); the final layer is linear.
struct Inr2d {
  std::size_t depth = 3;
  std::size_t width = 64;
  double w0 = 30.0;
  NormConstants norm;
  std::vector<ag::Tensor> weights;
  std::vector<ag::Tensor> biases;

  std::size_t in_dim() const { return 2; }
  std::size_t out_dim() const { return 3; }
  std::size_t param_count() const;
};

struct Arch {
  std::size_t depth = 3;
  std::size_t width = 64;
  double w0 = 30.0;
};

// Named presets mirroring the per-dataset model sizes: cifar (3/64),
// imagenet (4/256), cityscapes (5/256).
Arch preset(std::string_view name);

struct FitConfig {
  std::size_t iterations = 1000;
  double lr0 = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  void validate() const;
};

// Pixel-center coordinates in (-1,1)^2: column j -> x = (2j+1)/W - 1, row i
// -> y = (2i+1)/H - 1. Row-major over (i, j); columns are (x, y).
ag::Tensor grid_coords(std::size_t H, std::size_t W);

std::array<double, 3> normalize(const std::array<double, 3>& rgb, const NormConstants& n);
std::array<double, 3> denormalize(const std::array<double, 3>& v, const NormConstants& n);
ag::Tensor normalize_image(const ImageGrid& img, const NormConstants& n);  // (H W) x 3

Inr2d siren_init(std::size_t depth, std::size_t width, double w0, std::uint64_t seed);

// Parameter handles of a model on a tape.
struct Inr2dVars {
  std::vector<ag::Var> w, b;
  double w0 = 30.0;
};
Inr2dVars make_vars(ag::Tape& tape, const Inr2d& inr, bool trainable);

ag::Var query(ag::Tape& tape, const Inr2dVars& vars, ag::Var coords);
ag::Tensor query(const Inr2d& inr, const ag::Tensor& coords);

// Denormalized, clamped render over the pixel grid.
ImageGrid render_grid(const Inr2d& inr, std::size_t H, std::size_t W);

// PSNR against peak value 1, inputs clamped to [0,1] first.
// Identical images return the documented 99 dB cap.
double psnr(const ImageGrid& pred, const ImageGrid& gt);
inline constexpr double kPsnrCap = 99.0;

struct FitError : Error {
  using Error::Error;
};

// Incremental trainer so quality-control phases can continue on one model.
class Fitter {
 public:
  Fitter(const ImageGrid& img, const Arch& arch, std::uint64_t seed);

  // Trains up to `budget` iterations with a fresh Adam and a cosine schedule
  // spanning the budget. When check_every > 0, reports PSNR to on_check every
  // check_every iterations and stops early when it returns true.
  // Returns the number of iterations actually run.
  std::size_t run_phase(std::size_t budget, double lr0, double lr_min,
                        std::size_t check_every = 0,
                        const std::function<bool(double)>& on_check = nullptr);

  double current_psnr() const;
  const Inr2d& model() const { return model_; }
  std::size_t total_iterations() const { return total_iterations_; }

 private:
  ImageGrid img_;
  Inr2d model_;
  ag::Tensor coords_;
  ag::Tensor targets_;
  std::size_t total_iterations_ = 0;
};

struct FitResult {
  Inr2d inr;
  double psnr = 0.0;
  std::size_t iterations = 0;
};

FitResult fit_image(const ImageGrid& img, const FitConfig& cfg, const Arch& arch);

}  // namespace zoo::inr
