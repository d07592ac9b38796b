#include "zoo/inr2d.hpp"

#include <algorithm>
#include <cmath>

#include "zoo/rng.hpp"

namespace zoo::inr {

using ag::Shape;
using ag::Tensor;
using ag::Var;

void NormConstants::validate() const {
  for (double s : stdev) {
    if (!(s > 0.0)) throw Error("norm constants: std components must be positive");
  }
}

void FitConfig::validate() const {
  // iterations == 0 is allowed and returns the initialized model unchanged.
  if (!(lr_min > 0.0) || lr0 < lr_min) throw Error("fit config: need lr0 >= lr_min > 0");
}

std::size_t Inr2d::param_count() const {
  std::size_t n = 0;
  for (const Tensor& w : weights) n += w.size();
  for (const Tensor& b : biases) n += b.size();
  return n;
}

Arch preset(std::string_view name) {
  if (name == "cifar") return {3, 64, 30.0};
  if (name == "imagenet") return {4, 256, 30.0};
  if (name == "cityscapes") return {5, 256, 30.0};
  throw Error("unknown architecture preset: " + std::string(name));
}

ag::Tensor grid_coords(std::size_t H, std::size_t W) {
  if (H == 0 || W == 0) throw Error("grid_coords: empty grid");
  Tensor out({H * W, 2});
  for (std::size_t i = 0; i < H; ++i) {
    double y = (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(H) - 1.0;
    for (std::size_t j = 0; j < W; ++j) {
      double x = (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(W) - 1.0;
      out.at2(i * W + j, 0) = x;
      out.at2(i * W + j, 1) = y;
    }
  }
  return out;
}

std::array<double, 3> normalize(const std::array<double, 3>& rgb, const NormConstants& n) {
  return {(rgb[0] - n.mean[0]) / n.stdev[0], (rgb[1] - n.mean[1]) / n.stdev[1],
          (rgb[2] - n.mean[2]) / n.stdev[2]};
}

std::array<double, 3> denormalize(const std::array<double, 3>& v, const NormConstants& n) {
  return {v[0] * n.stdev[0] + n.mean[0], v[1] * n.stdev[1] + n.mean[1],
          v[2] * n.stdev[2] + n.mean[2]};
}

Tensor normalize_image(const ImageGrid& img, const NormConstants& n) {
  Tensor out({img.pixels(), 3});
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.at2(p, c) = (img.rgb[p * 3 + c] - n.mean[c]) / n.stdev[c];
    }
  }
  return out;
}

Inr2d siren_init(std::size_t depth, std::size_t width, double w0, std::uint64_t seed) {
  if (depth < 2) throw Error("siren_init: depth must be at least 2");
  if (width < 1) throw Error("siren_init: width must be positive");
  Inr2d m;
  m.depth = depth;
  m.width = width;
  m.w0 = w0;
  Rng rng(seed);
  for (std::size_t l = 0; l < depth; ++l) {
    std::size_t fan_in = (l == 0) ? 2 : width;
    std::size_t fan_out = (l + 1 == depth) ? 3 : width;
    // First layer U(-1/in, 1/in); later layers U(-sqrt(6/fan_in)/w0, ...).
    double wb = (l == 0) ? 1.0 / static_cast<double>(fan_in)
                         : std::sqrt(6.0 / static_cast<double>(fan_in)) / w0;
    double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (double& v : w.data) v = rng.uniform(-wb, wb);
    Tensor b({fan_out});
    for (double& v : b.data) v = rng.uniform(-bb, bb);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

Inr2dVars make_vars(ag::Tape& tape, const Inr2d& inr, bool trainable) {
  Inr2dVars vars;
  vars.w0 = inr.w0;
  for (std::size_t l = 0; l < inr.weights.size(); ++l) {
    vars.w.push_back(tape.leaf(inr.weights[l], trainable));
    vars.b.push_back(tape.leaf(inr.biases[l], trainable));
  }
  return vars;
}

Var query(ag::Tape& tape, const Inr2dVars& vars, Var coords) {
  Var h = coords;
  std::size_t depth = vars.w.size();
  for (std::size_t l = 0; l < depth; ++l) {
    Var z = add(matmul(h, vars.w[l]), vars.b[l]);
    h = (l + 1 == depth) ? z : ag::sin(scale(z, vars.w0));
  }
  return h;
}

Tensor query(const Inr2d& inr, const Tensor& coords) {
  ag::Tape tape;
  Inr2dVars vars = make_vars(tape, inr, false);
  Var out = query(tape, vars, tape.constant(coords));
  return tape.val(out);
}

ImageGrid render_grid(const Inr2d& inr, std::size_t H, std::size_t W) {
  Tensor v = query(inr, grid_coords(H, W));
  ImageGrid img(H, W);
  for (std::size_t p = 0; p < H * W; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      double x = v.at2(p, c) * inr.norm.stdev[c] + inr.norm.mean[c];
      img.rgb[p * 3 + c] = std::clamp(x, 0.0, 1.0);
    }
  }
  return img;
}

double psnr(const ImageGrid& pred, const ImageGrid& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("psnr: image shapes differ");
  }
  double se = 0.0;
  for (std::size_t i = 0; i < pred.rgb.size(); ++i) {
    double a = std::clamp(pred.rgb[i], 0.0, 1.0);
    double b = std::clamp(gt.rgb[i], 0.0, 1.0);
    double d = a - b;
    se += d * d;
  }
  double mse = se / static_cast<double>(pred.rgb.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(-10.0 * std::log10(mse), kPsnrCap);
}

Fitter::Fitter(const ImageGrid& img, const Arch& arch, std::uint64_t seed) : img_(img) {
  if (img.pixels() == 0) throw Error("fit: empty image");
  model_ = siren_init(arch.depth, arch.width, arch.w0, seed);
  coords_ = grid_coords(img.height, img.width);
  targets_ = normalize_image(img, model_.norm);
}

std::size_t Fitter::run_phase(std::size_t budget, double lr0, double lr_min,
                              std::size_t check_every,
                              const std::function<bool(double)>& on_check) {
  ag::Adam adam;
  std::vector<std::string> names;
  for (std::size_t l = 0; l < model_.weights.size(); ++l) {
    names.push_back("layer" + std::to_string(l) + ".weight");
    names.push_back("layer" + std::to_string(l) + ".bias");
  }
  for (std::size_t it = 0; it < budget; ++it) {
    double lr = ag::cosine_lr(it, budget, lr0, lr_min);
    ag::Tape tape;
    Inr2dVars vars = make_vars(tape, model_, true);
    Var out = query(tape, vars, tape.constant(coords_));
    Var loss = mse(out, tape.constant(targets_));
    double loss_val = tape.val(loss)[0];
    if (!std::isfinite(loss_val)) {
      throw FitError("fit: non-finite loss at iteration " +
                     std::to_string(total_iterations_) + " (lr=" + std::to_string(lr) + ")");
    }
    tape.backward(loss);
    std::vector<Tensor*> params;
    std::vector<const Tensor*> grads;
    for (std::size_t l = 0; l < model_.weights.size(); ++l) {
      params.push_back(&model_.weights[l]);
      grads.push_back(&tape.grad(vars.w[l]));
      params.push_back(&model_.biases[l]);
      grads.push_back(&tape.grad(vars.b[l]));
    }
    adam.step(params, grads, lr, &names);
    ++total_iterations_;
    if (check_every > 0 && (it + 1) % check_every == 0 && (it + 1) < budget && on_check) {
      if (on_check(current_psnr())) return it + 1;
    }
  }
  return budget;
}

double Fitter::current_psnr() const { return psnr(render_grid(model_, img_.height, img_.width), img_); }

FitResult fit_image(const ImageGrid& img, const FitConfig& cfg, const Arch& arch) {
  cfg.validate();
  Fitter f(img, arch, cfg.seed);
  f.run_phase(cfg.iterations, cfg.lr0, cfg.lr_min);
  return {f.model(), f.current_psnr(), f.total_iterations()};
}

}  // namespace zoo::inr
