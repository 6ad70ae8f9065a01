#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uavcast/scenario.hpp"

namespace uavcast::pavt {

/// A group of luma frames, each stored rows x columns (height x width).
/// Also used for the 3-D DCT coefficients of a group.
struct Gop {
  int width = 0;
  int height = 0;
  std::vector<Eigen::MatrixXd> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }
  std::size_t samples() const { return static_cast<std::size_t>(width) * height * frames.size(); }
};

/// Throws std::invalid_argument on inconsistent frame sizes or pixels
/// outside [0, peak].
void validate_gop(const Gop& gop, double peak);

/// Smooth gradients, moving rectangles and a little seeded noise, clamped to
/// [0, 255]. Deterministic in `seed`.
Gop synthetic_gop(std::uint64_t seed, int width = 176, int height = 144, int frames = 3);

/// Reads `frames` consecutive planar 8-bit luma frames starting at frame
/// `first_frame`.
Gop load_raw_gop(const std::filesystem::path& path, int width, int height, int frames, int first_frame = 0);

/// Orthonormal DCT-II matrix of size n (row k holds basis function k).
Eigen::MatrixXd dct_matrix(int n);

/// Separable orthonormal DCT-II over rows, columns and frames.
Gop dct3_forward(const Gop& gop);
Gop dct3_inverse(const Gop& coeffs);

struct BlockShape {
  int width = 22;
  int height = 18;

  int size() const { return width * height; }
};

struct CoefficientBlock {
  Eigen::VectorXd coefficients;  // row-major within the block
  double variance = 0.0;         // mean of squares (zero-mean model)
  int index = 0;                 // position in frame-major raster order
  int frame = 0;
  int row = 0;                   // top-left corner
  int col = 0;
};

/// Cuts every coefficient frame into blocks and sorts them by nonincreasing
/// variance, ties by raster index. Throws when the frame size is not a
/// multiple of the block shape.
std::vector<CoefficientBlock> blockize_and_sort(const Gop& coeffs, BlockShape shape = {});

/// Puts blocks back at their recorded positions; positions without a block
/// are zero.
Gop unblockize(const std::vector<CoefficientBlock>& blocks, BlockShape shape, int width, int height, int frames);

/// Sorted variances with `kept` blocks marked for transmission.
BlockSpectrum spectrum_of(const std::vector<CoefficientBlock>& blocks, int kept);

struct ScaledBlocks {
  std::vector<Eigen::VectorXd> signals;  // s_k x_k for k = 1..kept
  std::vector<double> scale;             // s_k = sqrt(p_k / lambda_k), 0 when lambda_k = 0
  double truncation = 0.0;               // sum of squares of the discarded blocks
};

/// Keeps the first `kept` (largest-variance) blocks and scales block k to
/// power p_k. Requires kept <= blocks.size() and power.p.size() >= kept.
ScaledBlocks select_and_scale(const std::vector<CoefficientBlock>& blocks, int kept, const PowerAllocation& power);

/// Orthonormal mixing of one block: the Sylvester-Hadamard matrix when the
/// length is a power of two, otherwise the Q factor of a seeded Gaussian
/// matrix.
class Whitener {
 public:
  Whitener(int length, std::uint64_t seed);

  Eigen::VectorXd whiten(const Eigen::VectorXd& block) const { return matrix_ * block; }
  Eigen::VectorXd dewhiten(const Eigen::VectorXd& block) const { return matrix_.transpose() * block; }
  bool is_hadamard() const { return hadamard_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
  bool hadamard_ = false;
};

/// y~ = h_k y + z per slot with z ~ N(0, noise_power), deterministic in seed.
std::vector<Eigen::VectorXd> transmit(const std::vector<Eigen::VectorXd>& signals, const std::vector<double>& gain,
                                      double noise_power, std::uint64_t seed);

enum class DecodeMode { zero_forcing, llse };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& text);

/// Per-slot estimates of the transmitted (whitened, unscaled) coefficients:
/// zero forcing divides by h s; llse multiplies by h s lambda / (h^2 s^2 lambda + sigma^2).
/// Throws std::domain_error for a zero gain in zero-forcing mode.
std::vector<Eigen::VectorXd> decode(const std::vector<Eigen::VectorXd>& received, const std::vector<double>& gain,
                                    const std::vector<double>& scale, const std::vector<double>& variances,
                                    double noise_power, DecodeMode mode);

/// Amplitude gains h_k = sqrt(beta0 / d_k^alpha) from each slot's position to
/// the user.
std::vector<double> channel_amplitudes(const Scenario& scenario, const Trajectory& traj, int user);

struct EndToEndResult {
  double mse = 0.0;
  double psnr_db = 0.0;  // +infinity for a perfect reconstruction
  Gop reconstruction;    // not clipped to the pixel range
};

/// Full chain for one user: transform, blocks, scaling, whitening, per-slot
/// channel, decoding, inverse placement (discarded blocks as zeros) and
/// inverse transform. Uses scenario.spectrum.kept, coeffs_per_block, channel
/// and pixel_peak; the block variances come from `gop` itself.
EndToEndResult end_to_end(const Gop& gop, const Scenario& scenario, const Trajectory& traj,
                          const PowerAllocation& power, int user, std::uint64_t seed, DecodeMode mode,
                          BlockShape shape = {});

struct MonteCarloResult {
  int user = 0;     // index into scenario.users
  int user_id = 0;
  DecodeMode mode = DecodeMode::zero_forcing;
  int trials = 0;
  std::size_t transmitted = 0;  // coefficients sent over all trials
  double empirical_mse = 0.0;   // mean over trials
  double analytic_mse = 0.0;
  double empirical_psnr_db = 0.0;
  double analytic_psnr_db = 0.0;
};

/// Repeats end_to_end with per-trial seeds derived from `seed` and compares
/// the mean MSE to the analytic model evaluated on the GOP's own spectrum.
MonteCarloResult monte_carlo(const Gop& gop, const Scenario& scenario, const Trajectory& traj,
                             const PowerAllocation& power, int user, DecodeMode mode, int trials,
                             std::uint64_t seed, BlockShape shape = {});

/// Columns user (the user id), mode, empirical_psnr_db, analytic_psnr_db, trials.
void write_psnr_csv(std::ostream& os, const std::vector<MonteCarloResult>& rows);

}  // namespace uavcast::pavt
