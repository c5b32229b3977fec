#include "fedm/dataset.hpp"

#include <charconv>
#include <fstream>
#include <span>
#include <sstream>
#include <vector>

namespace fedm {

Dataset::Dataset(std::string label, Vector y, Matrix z)
    : label_(std::move(label)), y_(std::move(y)), z_(std::move(z)) {
  if (y_.size() != z_.rows()) {
    throw DataError("dataset '" + label_ + "': outcome count " + std::to_string(y_.size()) +
                    " does not match covariate rows " + std::to_string(z_.rows()));
  }
  if (z_.cols() < 1) throw DataError("dataset '" + label_ + "': needs at least one covariate");
  if (!y_.allFinite() || !z_.allFinite()) {
    throw DataError("dataset '" + label_ + "': non-finite values");
  }
}

Dataset Dataset::with_label(std::string label) const {
  Dataset out = *this;
  out.label_ = std::move(label);
  return out;
}

Dataset Dataset::permuted(std::span<const Index> perm) const {
  if (static_cast<Index>(perm.size()) != size()) {
    throw ConfigError("permutation length does not match dataset size");
  }
  Vector y(size());
  Matrix z(size(), dim());
  for (Index i = 0; i < size(); ++i) {
    y(i) = y_(perm[static_cast<std::size_t>(i)]);
    z.row(i) = z_.row(perm[static_cast<std::size_t>(i)]);
  }
  return Dataset(label_, std::move(y), std::move(z));
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Dataset read_csv(std::istream& in, std::string label) {
  std::string line;
  std::size_t line_no = 0;
  const auto where = [&] { return "'" + label + "' line " + std::to_string(line_no); };

  if (!std::getline(in, line)) throw DataError("csv '" + label + "': empty input");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_commas(line);
  if (header.size() < 2 || trim(header[0]) != "y") {
    throw DataError("csv " + where() + ": header must start with 'y' followed by z1..zp");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (trim(header[j]) != "z" + std::to_string(j)) {
      throw DataError("csv " + where() + ": expected column 'z" + std::to_string(j) +
                      "', found '" + std::string(trim(header[j])) + "'");
    }
  }
  const std::size_t p = header.size() - 1;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != p + 1) {
      throw DataError("csv " + where() + ": expected " + std::to_string(p + 1) +
                      " fields, found " + std::to_string(fields.size()));
    }
    for (const auto raw : fields) {
      const auto field = trim(raw);
      double v = 0.0;
      const auto* first = field.data();
      const auto* last = field.data() + field.size();
      if (!field.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (field.empty() || ec != std::errc{} || ptr != last) {
        throw DataError("csv " + where() + ": cannot parse '" + std::string(field) +
                        "' as a number");
      }
      if (!std::isfinite(v)) throw DataError("csv " + where() + ": non-finite value");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError("csv '" + label + "': no data rows");

  Vector y(static_cast<Index>(rows));
  Matrix z(static_cast<Index>(rows), static_cast<Index>(p));
  for (std::size_t i = 0; i < rows; ++i) {
    y(static_cast<Index>(i)) = values[i * (p + 1)];
    for (std::size_t j = 0; j < p; ++j) {
      z(static_cast<Index>(i), static_cast<Index>(j)) = values[i * (p + 1) + 1 + j];
    }
  }
  return Dataset(std::move(label), std::move(y), std::move(z));
}

Dataset read_csv(const std::filesystem::path& path, std::string label) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  if (label.empty()) label = path.stem().string();
  return read_csv(in, std::move(label));
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw NumericalError("cannot format double");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  out << 'y';
  for (Index j = 0; j < data.dim(); ++j) out << ",z" << (j + 1);
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out << format_double(data.y()(i));
    for (Index j = 0; j < data.dim(); ++j) out << ',' << format_double(data.z()(i, j));
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, data);
}

}  // namespace fedm
