#include "uavcast/pavt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/QR>

#include "uavcast/channel.hpp"
#include "uavcast/csv.hpp"
#include "uavcast/quality.hpp"
#include "uavcast/rng.hpp"

namespace uavcast::pavt {

namespace {

void require_shape(const Gop& gop) {
  if (gop.width <= 0 || gop.height <= 0 || gop.frames.empty()) {
    throw std::invalid_argument("GOP must have positive dimensions and at least one frame");
  }
  for (std::size_t t = 0; t < gop.frames.size(); ++t) {
    if (gop.frames[t].rows() != gop.height || gop.frames[t].cols() != gop.width) {
      throw std::invalid_argument("frame " + std::to_string(t) + " has size " +
                                  std::to_string(gop.frames[t].cols()) + "x" + std::to_string(gop.frames[t].rows()) +
                                  ", expected " + std::to_string(gop.width) + "x" + std::to_string(gop.height));
    }
  }
}

// Applies `rows` on the left and `cols` on the right of every frame, then
// mixes frames with `temporal`.
Gop separable(const Gop& in, const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols,
              const Eigen::MatrixXd& temporal) {
  const int T = in.num_frames();
  std::vector<Eigen::MatrixXd> spatial(T);
  for (int t = 0; t < T; ++t) spatial[t] = rows * in.frames[t] * cols.transpose();
  Gop out{in.width, in.height, {}};
  out.frames.assign(T, Eigen::MatrixXd::Zero(in.height, in.width));
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < T; ++s) out.frames[t] += temporal(t, s) * spatial[s];
  }
  return out;
}

}  // namespace

void validate_gop(const Gop& gop, double peak) {
  require_shape(gop);
  for (std::size_t t = 0; t < gop.frames.size(); ++t) {
    const double lo = gop.frames[t].minCoeff();
    const double hi = gop.frames[t].maxCoeff();
    if (lo < 0.0 || hi > peak) {
      throw std::invalid_argument("frame " + std::to_string(t) + " has pixels outside [0, " +
                                  CsvWriter::format(peak) + "]");
    }
  }
}

Gop synthetic_gop(std::uint64_t seed, int width, int height, int frames) {
  if (width <= 0 || height <= 0 || frames <= 0) throw std::invalid_argument("synthetic GOP dimensions must be positive");
  Rng rng(derive_seed(seed, "gop"));

  struct Rect {
    double x, y, w, h, vx, vy, level;
  };
  std::vector<Rect> rects(3);
  for (auto& r : rects) {
    r.w = rng.uniform(0.15, 0.35) * width;
    r.h = rng.uniform(0.15, 0.35) * height;
    r.x = rng.uniform(0.0, width - r.w);
    r.y = rng.uniform(0.0, height - r.h);
    r.vx = rng.uniform(-4.0, 4.0);
    r.vy = rng.uniform(-4.0, 4.0);
    r.level = rng.uniform(-70.0, 70.0);
  }
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Gop gop{width, height, {}};
  for (int t = 0; t < frames; ++t) {
    Eigen::MatrixXd f(height, width);
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) {
        const double x = static_cast<double>(j) / width;
        const double y = static_cast<double>(i) / height;
        double v = 70.0 + 80.0 * x + 40.0 * y +
                   20.0 * std::sin(2.0 * std::numbers::pi * 1.5 * x + phase + 0.3 * t) *
                       std::cos(2.0 * std::numbers::pi * y);
        for (const auto& r : rects) {
          const double rx = r.x + r.vx * t;
          const double ry = r.y + r.vy * t;
          if (j >= rx && j < rx + r.w && i >= ry && i < ry + r.h) v += r.level;
        }
        v += 2.0 * rng.normal();
        f(i, j) = std::clamp(v, 0.0, 255.0);
      }
    }
    gop.frames.push_back(std::move(f));
  }
  return gop;
}

Gop load_raw_gop(const std::filesystem::path& path, int width, int height, int frames, int first_frame) {
  if (width <= 0 || height <= 0 || frames <= 0 || first_frame < 0) {
    throw std::invalid_argument("raw video dimensions must be positive");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  const std::streamoff frame_bytes = static_cast<std::streamoff>(width) * height;
  in.seekg(frame_bytes * first_frame);
  Gop gop{width, height, {}};
  std::vector<unsigned char> buf(static_cast<std::size_t>(frame_bytes));
  for (int t = 0; t < frames; ++t) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), frame_bytes)) {
      throw std::runtime_error(path.string() + ": file ends inside frame " + std::to_string(first_frame + t) +
                               " (" + std::to_string(width) + "x" + std::to_string(height) + " planar 8-bit)");
    }
    Eigen::MatrixXd f(height, width);
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) f(i, j) = buf[static_cast<std::size_t>(i) * width + j];
    }
    gop.frames.push_back(std::move(f));
  }
  return gop;
}

Eigen::MatrixXd dct_matrix(int n) {
  Eigen::MatrixXd c(n, n);
  for (int k = 0; k < n; ++k) {
    const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i) c(k, i) = alpha * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
  }
  return c;
}

Gop dct3_forward(const Gop& gop) {
  require_shape(gop);
  return separable(gop, dct_matrix(gop.height), dct_matrix(gop.width), dct_matrix(gop.num_frames()));
}

Gop dct3_inverse(const Gop& coeffs) {
  require_shape(coeffs);
  return separable(coeffs, dct_matrix(coeffs.height).transpose(), dct_matrix(coeffs.width).transpose(),
                   dct_matrix(coeffs.num_frames()).transpose());
}

std::vector<CoefficientBlock> blockize_and_sort(const Gop& coeffs, BlockShape shape) {
  require_shape(coeffs);
  if (shape.width <= 0 || shape.height <= 0 || coeffs.width % shape.width != 0 ||
      coeffs.height % shape.height != 0) {
    throw std::invalid_argument("frame size " + std::to_string(coeffs.width) + "x" + std::to_string(coeffs.height) +
                                " is not divisible by block shape " + std::to_string(shape.width) + "x" +
                                std::to_string(shape.height));
  }
  const int bx = coeffs.width / shape.width;
  const int by = coeffs.height / shape.height;
  std::vector<CoefficientBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(bx) * by * coeffs.frames.size());
  for (int t = 0; t < coeffs.num_frames(); ++t) {
    for (int r = 0; r < by; ++r) {
      for (int c = 0; c < bx; ++c) {
        CoefficientBlock b;
        b.index = static_cast<int>(blocks.size());
        b.frame = t;
        b.row = r * shape.height;
        b.col = c * shape.width;
        b.coefficients.resize(shape.size());
        for (int i = 0; i < shape.height; ++i) {
          for (int j = 0; j < shape.width; ++j) {
            b.coefficients(i * shape.width + j) = coeffs.frames[t](b.row + i, b.col + j);
          }
        }
        b.variance = b.coefficients.squaredNorm() / shape.size();
        blocks.push_back(std::move(b));
      }
    }
  }
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const CoefficientBlock& a, const CoefficientBlock& b) { return a.variance > b.variance; });
  return blocks;
}

Gop unblockize(const std::vector<CoefficientBlock>& blocks, BlockShape shape, int width, int height, int frames) {
  Gop out{width, height, {}};
  out.frames.assign(frames, Eigen::MatrixXd::Zero(height, width));
  for (const auto& b : blocks) {
    if (b.frame < 0 || b.frame >= frames || b.row < 0 || b.col < 0 || b.row + shape.height > height ||
        b.col + shape.width > width || b.coefficients.size() != shape.size()) {
      throw std::invalid_argument("block " + std::to_string(b.index) + " does not fit the target volume");
    }
    for (int i = 0; i < shape.height; ++i) {
      for (int j = 0; j < shape.width; ++j) out.frames[b.frame](b.row + i, b.col + j) = b.coefficients(i * shape.width + j);
    }
  }
  return out;
}

BlockSpectrum spectrum_of(const std::vector<CoefficientBlock>& blocks, int kept) {
  BlockSpectrum s;
  s.variances.reserve(blocks.size());
  for (const auto& b : blocks) s.variances.push_back(b.variance);
  s.kept = kept;
  return s;
}

ScaledBlocks select_and_scale(const std::vector<CoefficientBlock>& blocks, int kept, const PowerAllocation& power) {
  if (kept < 0 || kept > static_cast<int>(blocks.size())) throw std::invalid_argument("kept exceeds the block count");
  if (static_cast<int>(power.p.size()) < kept) throw std::invalid_argument("fewer powers than kept blocks");
  ScaledBlocks out;
  for (int k = 0; k < kept; ++k) {
    const double lambda = blocks[k].variance;
    const double s = lambda > 0.0 ? std::sqrt(power.p[k] / lambda) : 0.0;
    out.scale.push_back(s);
    out.signals.push_back(s * blocks[k].coefficients);
  }
  for (std::size_t m = kept; m < blocks.size(); ++m) out.truncation += blocks[m].coefficients.squaredNorm();
  return out;
}

Whitener::Whitener(int length, std::uint64_t seed) {
  if (length <= 0) throw std::invalid_argument("whitening length must be positive");
  hadamard_ = (length & (length - 1)) == 0;
  if (hadamard_) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
    while (h.rows() < length) {
      const Eigen::Index n = h.rows();
      Eigen::MatrixXd next(2 * n, 2 * n);
      next << h, h, h, -h;
      h = std::move(next);
    }
    matrix_ = h / std::sqrt(static_cast<double>(length));
    return;
  }
  Rng rng(seed);
  Eigen::MatrixXd g(length, length);
  for (int j = 0; j < length; ++j) {
    for (int i = 0; i < length; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < length; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  matrix_ = std::move(q);
}

std::vector<Eigen::VectorXd> transmit(const std::vector<Eigen::VectorXd>& signals, const std::vector<double>& gain,
                                      double noise_power, std::uint64_t seed) {
  if (gain.size() < signals.size()) throw std::invalid_argument("fewer channel gains than slots");
  Rng rng(seed);
  const double sigma = std::sqrt(noise_power);
  std::vector<Eigen::VectorXd> out;
  out.reserve(signals.size());
  for (std::size_t k = 0; k < signals.size(); ++k) {
    if (!(gain[k] > 0.0)) throw std::domain_error("channel gain must be positive");
    Eigen::VectorXd y = gain[k] * signals[k];
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sigma * rng.normal();
    out.push_back(std::move(y));
  }
  return out;
}

std::string to_string(DecodeMode mode) { return mode == DecodeMode::llse ? "llse" : "zero_forcing"; }

DecodeMode parse_decode_mode(const std::string& text) {
  if (text == "zero_forcing" || text == "zf") return DecodeMode::zero_forcing;
  if (text == "llse") return DecodeMode::llse;
  throw std::invalid_argument("unknown decode mode '" + text + "' (expected zero_forcing or llse)");
}

std::vector<Eigen::VectorXd> decode(const std::vector<Eigen::VectorXd>& received, const std::vector<double>& gain,
                                    const std::vector<double>& scale, const std::vector<double>& variances,
                                    double noise_power, DecodeMode mode) {
  const std::size_t K = received.size();
  if (gain.size() < K || scale.size() < K || variances.size() < K) {
    throw std::invalid_argument("decode needs a gain, scale and variance per slot");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double hs = gain[k] * scale[k];
    // A zero-variance block is all zeros and sent as such.
    if (scale[k] == 0.0 && variances[k] == 0.0) {
      out.push_back(Eigen::VectorXd::Zero(received[k].size()));
      continue;
    }
    if (mode == DecodeMode::zero_forcing) {
      if (!(hs > 0.0)) throw std::domain_error("zero-forcing decode with zero gain in slot " + std::to_string(k + 1));
      out.push_back(received[k] / hs);
    } else {
      const double denom = hs * hs * variances[k] + noise_power;
      const double w = denom > 0.0 ? hs * variances[k] / denom : 0.0;
      out.push_back(w * received[k]);
    }
  }
  return out;
}

std::vector<double> channel_amplitudes(const Scenario& s, const Trajectory& traj, int user) {
  const Vec3& w = s.users.at(user).position;
  std::vector<double> h(traj.slots());
  for (int k = 1; k <= traj.slots(); ++k) h[k - 1] = std::sqrt(inst_gain_squared(s.channel, traj.q[k], w));
  return h;
}

EndToEndResult end_to_end(const Gop& gop, const Scenario& s, const Trajectory& traj, const PowerAllocation& power,
                          int user, std::uint64_t seed, DecodeMode mode, BlockShape shape) {
  require_shape(gop);
  if (shape.size() != s.coeffs_per_block) {
    throw std::invalid_argument("block shape holds " + std::to_string(shape.size()) +
                                " coefficients but the scenario expects " + std::to_string(s.coeffs_per_block));
  }
  const Gop coeffs = dct3_forward(gop);
  std::vector<CoefficientBlock> blocks = blockize_and_sort(coeffs, shape);
  const int kept = s.spectrum.kept;
  if (traj.slots() < kept) throw std::invalid_argument("trajectory has fewer slots than kept blocks");
  const ScaledBlocks scaled = select_and_scale(blocks, kept, power);

  const Whitener whitener(shape.size(), derive_seed(s.seed, "whitening"));
  std::vector<Eigen::VectorXd> sent;
  sent.reserve(kept);
  for (const auto& x : scaled.signals) sent.push_back(whitener.whiten(x));

  const std::vector<double> h = channel_amplitudes(s, traj, user);
  const auto received = transmit(sent, h, s.channel.noise_power, seed);
  std::vector<double> variances(kept);
  for (int k = 0; k < kept; ++k) variances[k] = blocks[k].variance;
  const auto estimates = decode(received, h, scaled.scale, variances, s.channel.noise_power, mode);

  for (int k = 0; k < kept; ++k) blocks[k].coefficients = whitener.dewhiten(estimates[k]);
  blocks.resize(kept);
  EndToEndResult out;
  out.reconstruction =
      dct3_inverse(unblockize(blocks, shape, coeffs.width, coeffs.height, coeffs.num_frames()));

  double sq = 0.0;
  double worst = 0.0;
  for (int t = 0; t < gop.num_frames(); ++t) {
    const Eigen::ArrayXXd diff = (out.reconstruction.frames[t] - gop.frames[t]).array();
    sq += diff.square().sum();
    worst = std::max(worst, diff.abs().maxCoeff());
  }
  out.mse = sq / static_cast<double>(gop.samples());
  // Residual roundoff of the transforms counts as a perfect reconstruction.
  out.psnr_db = worst <= 1e-6 ? std::numeric_limits<double>::infinity() : psnr_from_mse(out.mse, s.pixel_peak);
  return out;
}

MonteCarloResult monte_carlo(const Gop& gop, const Scenario& s, const Trajectory& traj, const PowerAllocation& power,
                             int user, DecodeMode mode, int trials, std::uint64_t seed, BlockShape shape) {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  MonteCarloResult r;
  r.user = user;
  r.user_id = s.users.at(user).id;
  r.mode = mode;
  r.trials = trials;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(derive_seed(seed, "noise", static_cast<std::uint64_t>(user)), "trial",
                                                 static_cast<std::uint64_t>(t));
    total += end_to_end(gop, s, traj, power, user, trial_seed, mode, shape).mse;
  }
  r.empirical_mse = total / trials;
  r.transmitted = static_cast<std::size_t>(trials) * s.spectrum.kept * shape.size();

  Scenario own = s;
  own.spectrum = spectrum_of(blockize_and_sort(dct3_forward(gop), shape), s.spectrum.kept);
  r.analytic_mse = mse(own, traj, power, user);
  r.empirical_psnr_db = psnr_from_mse(r.empirical_mse, s.pixel_peak);
  r.analytic_psnr_db = psnr_from_mse(r.analytic_mse, s.pixel_peak);
  return r;
}

void write_psnr_csv(std::ostream& os, const std::vector<MonteCarloResult>& rows) {
  CsvWriter csv(os);
  csv.row("user", "mode", "empirical_psnr_db", "analytic_psnr_db", "trials");
  for (const auto& r : rows) csv.row(r.user_id, to_string(r.mode), r.empirical_psnr_db, r.analytic_psnr_db, r.trials);
}

}  // namespace uavcast::pavt
