#include "fqgan/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "fqgan/io.hpp"

namespace fqgan {

void MixtureSpec::validate() const {
  if (means.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (!(stddev > 0.0)) throw std::invalid_argument("mixture std must be positive");
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = i + 1; j < means.size(); ++j)
      if (means[i] == means[j]) throw std::invalid_argument("mixture means must be distinct");
}

MixtureSpec ring_mixture(std::size_t modes, double radius, double stddev) {
  if (modes < 1) throw std::invalid_argument("ring needs at least one mode");
  if (!(radius > 0.0)) throw std::invalid_argument("ring radius must be positive");
  MixtureSpec spec;
  spec.stddev = stddev;
  for (std::size_t i = 0; i < modes; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(modes);
    spec.means.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  return spec;
}

MixtureSpec grid_mixture(std::size_t side, double spacing, double stddev) {
  if (side < 1) throw std::invalid_argument("grid needs side >= 1");
  MixtureSpec spec;
  spec.stddev = stddev;
  const double offset = 0.5 * static_cast<double>(side - 1);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j)
      spec.means.push_back({(static_cast<double>(i) - offset) * spacing,
                            (static_cast<double>(j) - offset) * spacing});
  return spec;
}

Tensor sample(const MixtureSpec& spec, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  if (spec.means.empty()) throw std::invalid_argument("mixture has no components");
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& mu = spec.means[rng.index(spec.means.size())];
    const double nx = rng.normal();
    const double ny = rng.normal();
    out.at(i, 0) = mu[0] + spec.stddev * nx;
    out.at(i, 1) = mu[1] + spec.stddev * ny;
  }
  return out;
}

Tensor sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample(spec, n, rng);
}

Tensor load_csv(const std::filesystem::path& path, std::size_t expected_dim, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_header && line_no == 1) continue;
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string field =
          trim(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      double v = 0.0;
      if (!parse_double(field, v))
        throw CsvError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                       field + "'");
      values.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields != expected_dim)
      throw CsvError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(expected_dim) + " columns, got " + std::to_string(fields));
    ++rows;
  }
  if (rows == 0) throw CsvError(path.string() + ": no data rows");
  return Tensor({rows, expected_dim}, std::move(values));
}

void save_csv(const std::filesystem::path& path, const Tensor& rows) {
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace fqgan
