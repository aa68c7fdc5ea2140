#pragma once

// Discretized functions on [0,1] and [0,1]^2: uniform grids, trapezoid
// quadrature, basis sets and curve-data ingestion.

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace relslope {

inline constexpr std::size_t kDefaultGridPoints = 101;

/// Uniform grid on [0,1] including both endpoints.
class Grid {
 public:
  explicit Grid(std::size_t n_points = kDefaultGridPoints);

  std::size_t size() const { return static_cast<std::size_t>(points_.size()); }
  double spacing() const { return 1.0 / static_cast<double>(size() - 1); }
  double point(std::size_t i) const { return points_[static_cast<Eigen::Index>(i)]; }
  const Eigen::VectorXd& points() const { return points_; }
  /// Composite trapezoid weights: h/2 at the endpoints, h inside.
  const Eigen::VectorXd& weights() const { return weights_; }

  bool operator==(const Grid& other) const { return size() == other.size(); }

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

/// A function on [0,1] sampled on a Grid. Immutable.
class Curve {
 public:
  Curve(Grid grid, Eigen::VectorXd values);

  static Curve from_function(const Grid& grid, const std::function<double(double)>& f);
  static Curve constant(const Grid& grid, double c);

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return grid_.size(); }

  Curve operator+(const Curve& other) const;
  Curve operator-(const Curve& other) const;
  Curve operator*(double c) const;

 private:
  Grid grid_;
  Eigen::VectorXd values_;
};

/// A function on [0,1]^2; rows index s, columns index t.
class Curve2D {
 public:
  Curve2D(Grid grid_s, Grid grid_t, Eigen::MatrixXd values);

  static Curve2D from_function(const Grid& grid_s, const Grid& grid_t,
                               const std::function<double(double, double)>& f);

  const Grid& grid_s() const { return grid_s_; }
  const Grid& grid_t() const { return grid_t_; }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Grid grid_s_;
  Grid grid_t_;
  Eigen::MatrixXd values_;
};

enum class BasisKind { galerkin_spline, fourier, cosine };

struct BasisSet {
  Grid grid;
  std::vector<Curve> functions;
  BasisKind kind;
  std::optional<std::vector<Curve>> second_derivatives;

  std::size_t size() const { return functions.size(); }
};

double inner_l2(const Curve& f, const Curve& g);
double norm_l2_sq(const Curve& f);
double inner_l2_2d(const Curve2D& f, const Curve2D& g);

/// Cosine basis: eta_1 = 1, eta_l(t) = sqrt(2) cos((l-1) pi t).
double cosine_function(std::size_t l, double t);
BasisSet cosine_basis(const Grid& grid, std::size_t count);

/// Fourier basis on [0,1]: 1, then sqrt(2) sin(2 pi k t), sqrt(2) cos(2 pi k t).
double fourier_function(std::size_t index, double t);
BasisSet fourier_basis(const Grid& grid, std::size_t n_basis);

/// Centered empirical covariance kernel with 1/n normalization.
Curve2D empirical_covariance(std::span<const Curve> sample);

/// Least-squares projection of raw observations onto the first n_basis
/// Fourier functions, evaluated on `grid`.
Curve fourier_project(std::span<const double> times, std::span<const double> values,
                      std::size_t n_basis, const Grid& grid);

/// Observation times for m equally spaced daily-style readings: (i + 1/2) / m.
std::vector<double> midpoint_times(std::size_t m);

// CSV ingestion -----------------------------------------------------------

enum class CsvHeader { automatic, present, absent };

/// Rows are observations, columns are grid values. With no explicit grid the
/// grid is taken from the column count.
std::vector<Curve> read_curves_csv(const std::filesystem::path& path,
                                   std::optional<Grid> grid = std::nullopt,
                                   CsvHeader header = CsvHeader::automatic);
void write_curves_csv(const std::filesystem::path& path, std::span<const Curve> curves);

/// One numeric value per line; a non-numeric first line is skipped as header.
Eigen::VectorXd read_scalars_csv(const std::filesystem::path& path);
void write_scalars_csv(const std::filesystem::path& path, const Eigen::VectorXd& values,
                       const std::string& header = "y");

/// Raw numeric table without grid interpretation (rows of equal length).
std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path,
                                                   bool skip_header);

/// First row: empty cell then t coordinates; each following row: s then values.
void write_curve2d_csv(const std::filesystem::path& path, const Curve2D& f);
Curve2D read_curve2d_csv(const std::filesystem::path& path);

void write_metadata_json(const std::filesystem::path& path, const Grid& grid, BasisKind kind);

std::string to_string(BasisKind kind);

/// Formats with 17 significant digits so that parsing restores the value.
std::string format_double(double x);

}  // namespace relslope
