#include "relslope/funcspace.hpp"

#include "relslope/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace relslope {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* op) {
  if (!(a == b)) {
    throw ContractError(std::string(op) + ": grid mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + " points)");
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::optional<std::vector<double>> parse_row(const std::vector<std::string>& fields) {
  std::vector<double> row;
  row.reserve(fields.size());
  for (const auto& f : fields) {
    auto v = parse_double(f);
    if (!v) return std::nullopt;
    row.push_back(*v);
  }
  return row;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

bool looks_like_grid(const std::vector<double>& row) {
  if (row.size() < 2) return false;
  const Grid g(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (std::abs(row[i] - g.point(i)) > 1e-9) return false;
  }
  return true;
}

}  // namespace

Grid::Grid(std::size_t n_points) {
  require(n_points >= 9, "Grid: at least 9 points required, got " + std::to_string(n_points));
  const auto n = static_cast<Eigen::Index>(n_points);
  points_.resize(n);
  const double h = 1.0 / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) points_[i] = static_cast<double>(i) * h;
  points_[n - 1] = 1.0;
  weights_ = Eigen::VectorXd::Constant(n, h);
  weights_[0] = weights_[n - 1] = 0.5 * h;
}

Curve::Curve(Grid grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  require(static_cast<std::size_t>(values_.size()) == grid_.size(),
          "Curve: " + std::to_string(values_.size()) + " values for a grid of " +
              std::to_string(grid_.size()) + " points");
  require(values_.allFinite(), "Curve: non-finite value");
}

Curve Curve::from_function(const Grid& grid, const std::function<double(double)>& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(grid.point(i));
  return Curve(grid, std::move(v));
}

Curve Curve::constant(const Grid& grid, double c) {
  return Curve(grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), c));
}

Curve Curve::operator+(const Curve& other) const {
  require_same_grid(grid_, other.grid_, "Curve::operator+");
  return Curve(grid_, values_ + other.values_);
}

Curve Curve::operator-(const Curve& other) const {
  require_same_grid(grid_, other.grid_, "Curve::operator-");
  return Curve(grid_, values_ - other.values_);
}

Curve Curve::operator*(double c) const { return Curve(grid_, values_ * c); }

Curve2D::Curve2D(Grid grid_s, Grid grid_t, Eigen::MatrixXd values)
    : grid_s_(std::move(grid_s)), grid_t_(std::move(grid_t)), values_(std::move(values)) {
  require(static_cast<std::size_t>(values_.rows()) == grid_s_.size() &&
              static_cast<std::size_t>(values_.cols()) == grid_t_.size(),
          "Curve2D: value matrix does not match grid dimensions");
  require(values_.allFinite(), "Curve2D: non-finite value");
}

Curve2D Curve2D::from_function(const Grid& grid_s, const Grid& grid_t,
                               const std::function<double(double, double)>& f) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(grid_s.size()),
                    static_cast<Eigen::Index>(grid_t.size()));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      v(i, j) = f(grid_s.point(static_cast<std::size_t>(i)), grid_t.point(static_cast<std::size_t>(j)));
  return Curve2D(grid_s, grid_t, std::move(v));
}

double inner_l2(const Curve& f, const Curve& g) {
  require_same_grid(f.grid(), g.grid(), "inner_l2");
  return (f.grid().weights().array() * f.values().array() * g.values().array()).sum();
}

double norm_l2_sq(const Curve& f) { return inner_l2(f, f); }

double inner_l2_2d(const Curve2D& f, const Curve2D& g) {
  require_same_grid(f.grid_s(), g.grid_s(), "inner_l2_2d");
  require_same_grid(f.grid_t(), g.grid_t(), "inner_l2_2d");
  const Eigen::MatrixXd prod = f.values().cwiseProduct(g.values());
  return f.grid_s().weights().dot(prod * g.grid_t().weights());
}

double cosine_function(std::size_t l, double t) {
  if (l == 1) return 1.0;
  return std::numbers::sqrt2 * std::cos(static_cast<double>(l - 1) * std::numbers::pi * t);
}

BasisSet cosine_basis(const Grid& grid, std::size_t count) {
  BasisSet basis{grid, {}, BasisKind::cosine, std::nullopt};
  for (std::size_t l = 1; l <= count; ++l)
    basis.functions.push_back(Curve::from_function(grid, [l](double t) { return cosine_function(l, t); }));
  return basis;
}

double fourier_function(std::size_t index, double t) {
  if (index == 0) return 1.0;
  const auto k = static_cast<double>((index + 1) / 2);
  const double arg = 2.0 * std::numbers::pi * k * t;
  return std::numbers::sqrt2 * (index % 2 == 1 ? std::sin(arg) : std::cos(arg));
}

BasisSet fourier_basis(const Grid& grid, std::size_t n_basis) {
  require(n_basis % 2 == 1, "fourier_basis: n_basis must be odd");
  BasisSet basis{grid, {}, BasisKind::fourier, std::nullopt};
  for (std::size_t j = 0; j < n_basis; ++j)
    basis.functions.push_back(Curve::from_function(grid, [j](double t) { return fourier_function(j, t); }));
  return basis;
}

Curve2D empirical_covariance(std::span<const Curve> sample) {
  require(!sample.empty(), "empirical_covariance: empty sample");
  const Grid& grid = sample.front().grid();
  const auto p = static_cast<Eigen::Index>(grid.size());
  const auto n = static_cast<Eigen::Index>(sample.size());
  Eigen::MatrixXd data(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    require_same_grid(grid, sample[static_cast<std::size_t>(i)].grid(), "empirical_covariance");
    data.row(i) = sample[static_cast<std::size_t>(i)].values().transpose();
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;
  Eigen::MatrixXd cov(p, p);
  cov.setZero();
  cov.selfadjointView<Eigen::Lower>().rankUpdate(data.transpose(), 1.0 / static_cast<double>(n));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return Curve2D(grid, grid, std::move(cov));
}

Curve fourier_project(std::span<const double> times, std::span<const double> values,
                      std::size_t n_basis, const Grid& grid) {
  require(times.size() == values.size(), "fourier_project: times/values length mismatch");
  require(n_basis % 2 == 1, "fourier_project: n_basis must be odd");
  require(values.size() >= n_basis, "fourier_project: need at least n_basis observations");
  const auto m = static_cast<Eigen::Index>(values.size());
  const auto k = static_cast<Eigen::Index>(n_basis);
  Eigen::MatrixXd design(m, k);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    y[i] = values[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      design(i, j) = fourier_function(static_cast<std::size_t>(j), times[static_cast<std::size_t>(i)]);
  }
  require(y.allFinite(), "fourier_project: non-finite observation");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    throw ContractError("fourier_project: design is rank deficient (rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(k) + "); too few distinct time points");
  }
  const Eigen::VectorXd coef = qr.solve(y);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) acc += coef[j] * fourier_function(static_cast<std::size_t>(j), grid.point(i));
    out[static_cast<Eigen::Index>(i)] = acc;
  }
  return Curve(grid, std::move(out));
}

std::vector<double> midpoint_times(std::size_t m) {
  std::vector<double> t(m);
  for (std::size_t i = 0; i < m; ++i) t[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
  return t;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& path, bool skip_header) {
  const auto lines = read_lines(path);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = skip_header ? 1 : 0; i < lines.size(); ++i) {
    auto row = parse_row(split_fields(lines[i]));
    if (!row) throw ContractError(path.string() + ": non-numeric cell in row " + std::to_string(i));
    if (!rows.empty() && row->size() != rows.front().size()) {
      throw ContractError(path.string() + ": ragged row " + std::to_string(i) + " (" +
                          std::to_string(row->size()) + " cells, expected " +
                          std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(*row));
  }
  return rows;
}

std::vector<Curve> read_curves_csv(const std::filesystem::path& path, std::optional<Grid> grid,
                                   CsvHeader header) {
  const auto lines = read_lines(path);
  require(!lines.empty(), path.string() + ": empty file");

  std::size_t first_data = 0;
  const auto first_fields = split_fields(lines.front());
  const auto first_row = parse_row(first_fields);
  if (header == CsvHeader::present) {
    first_data = 1;
  } else if (header == CsvHeader::automatic) {
    if (!first_row || (lines.size() > 1 && looks_like_grid(*first_row))) first_data = 1;
  }
  if (first_data == 1 && first_row) {
    // A numeric header carries grid coordinates and must agree with the grid.
    const Grid header_grid(first_row->size());
    require(looks_like_grid(*first_row), path.string() + ": header row is not a uniform [0,1] grid");
    if (grid) {
      require(*grid == header_grid, path.string() + ": header grid has " + std::to_string(first_row->size()) +
                                        " points, expected " + std::to_string(grid->size()));
    }
    grid = header_grid;
  }

  std::vector<Curve> curves;
  for (std::size_t i = first_data; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    auto row = parse_row(fields);
    if (!row) throw ContractError(path.string() + ": non-numeric cell in row " + std::to_string(i));
    if (!grid) grid = Grid(row->size());
    if (row->size() != grid->size()) {
      throw ContractError(path.string() + ": ragged row " + std::to_string(i) + " (" +
                          std::to_string(row->size()) + " cells, expected " + std::to_string(grid->size()) + ")");
    }
    curves.emplace_back(*grid, Eigen::Map<const Eigen::VectorXd>(row->data(), static_cast<Eigen::Index>(row->size())));
  }
  return curves;
}

void write_curves_csv(const std::filesystem::path& path, std::span<const Curve> curves) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  if (curves.empty()) return;
  const Grid& grid = curves.front().grid();
  for (std::size_t j = 0; j < grid.size(); ++j) out << (j ? "," : "") << format_double(grid.point(j));
  out << '\n';
  for (const auto& c : curves) {
    require_same_grid(grid, c.grid(), "write_curves_csv");
    for (std::size_t j = 0; j < c.size(); ++j) out << (j ? "," : "") << format_double(c[j]);
    out << '\n';
  }
}

Eigen::VectorXd read_scalars_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<double> values;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 1) {
      throw ContractError(path.string() + ": row " + std::to_string(i) + " has " + std::to_string(fields.size()) +
                          " cells, expected 1");
    }
    auto v = parse_double(fields.front());
    if (!v) {
      if (i == 0) continue;
      throw ContractError(path.string() + ": non-numeric cell in row " + std::to_string(i));
    }
    require(std::isfinite(*v), path.string() + ": non-finite value in row " + std::to_string(i));
    values.push_back(*v);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_scalars_csv(const std::filesystem::path& path, const Eigen::VectorXd& values,
                       const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  out << header << '\n';
  for (Eigen::Index i = 0; i < values.size(); ++i) out << format_double(values[i]) << '\n';
}

void write_curve2d_csv(const std::filesystem::path& path, const Curve2D& f) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  for (std::size_t j = 0; j < f.grid_t().size(); ++j) out << ',' << format_double(f.grid_t().point(j));
  out << '\n';
  for (Eigen::Index i = 0; i < f.values().rows(); ++i) {
    out << format_double(f.grid_s().point(static_cast<std::size_t>(i)));
    for (Eigen::Index j = 0; j < f.values().cols(); ++j) out << ',' << format_double(f.values()(i, j));
    out << '\n';
  }
}

Curve2D read_curve2d_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  require(lines.size() >= 2, path.string() + ": 2-D curve file needs a header and data rows");
  auto head = split_fields(lines.front());
  require(!head.empty() && head.front().empty(), path.string() + ": first header cell must be empty");
  head.erase(head.begin());
  const auto t = parse_row(head);
  require(t && looks_like_grid(*t), path.string() + ": column header is not a uniform [0,1] grid");
  const Grid grid_t(t->size());
  const Grid grid_s(lines.size() - 1);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(grid_s.size()), static_cast<Eigen::Index>(grid_t.size()));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto row = parse_row(split_fields(lines[i]));
    if (!row) throw ContractError(path.string() + ": non-numeric cell in row " + std::to_string(i));
    if (row->size() != grid_t.size() + 1) throw ContractError(path.string() + ": ragged row " + std::to_string(i));
    require(std::abs(row->front() - grid_s.point(i - 1)) <= 1e-9,
            path.string() + ": row header of row " + std::to_string(i) + " off the uniform grid");
    for (std::size_t j = 0; j < grid_t.size(); ++j)
      values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = (*row)[j + 1];
  }
  return Curve2D(grid_s, grid_t, std::move(values));
}

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::galerkin_spline: return "galerkin_spline";
    case BasisKind::fourier: return "fourier";
    case BasisKind::cosine: return "cosine";
  }
  return "unknown";
}

void write_metadata_json(const std::filesystem::path& path, const Grid& grid, BasisKind kind) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  nlohmann::ordered_json j;
  j["grid_points"] = grid.size();
  j["basis_kind"] = to_string(kind);
  out << j.dump(2) << '\n';
}

}  // namespace relslope
