#include "spekit/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "spekit/errors.hpp"

namespace spekit {
namespace fs = std::filesystem;

namespace {

bool is_csv(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return s;
}

void spill(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<std::uint64_t>(v) >> (8 * i) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t off) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& tok, const fs::path& path, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + tok +
                      "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& tok, const fs::path& path, std::size_t line_no) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": not an unsigned integer: '" + tok + "'");
  }
  return v;
}

// Tracks the last timestamp per channel for the monotonicity check.
struct MonotoneCheck {
  std::array<std::uint64_t, 256> last{};
  std::array<bool, 256> seen{};

  bool accept(const PhotonRecord& r) {
    if (seen[r.channel] && r.timestamp_ps < last[r.channel]) return false;
    seen[r.channel] = true;
    last[r.channel] = r.timestamp_ps;
    return true;
  }
};

TimeTags read_tag_csv(const fs::path& path) {
  std::istringstream in(slurp(path));
  TimeTags tags;
  MonotoneCheck mono;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header) {
      auto cols = split_commas(t);
      if (cols.size() != 2 || cols[0] != "timestamp_ps" || cols[1] != "channel") {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": expected header 'timestamp_ps,channel'");
      }
      header = true;
      continue;
    }
    auto cols = split_commas(t);
    if (cols.size() != 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                        std::to_string(cols.size()));
    }
    PhotonRecord r;
    r.timestamp_ps = parse_u64(cols[0], path, line_no);
    auto ch = parse_u64(cols[1], path, line_no);
    if (ch > 255) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": channel out of range");
    }
    r.channel = static_cast<std::uint8_t>(ch);
    if (!mono.accept(r)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": timestamp decreases on channel " + std::to_string(r.channel));
    }
    tags.records.push_back(r);
  }
  if (!header) throw FormatError(path.string() + ": missing header 'timestamp_ps,channel'");
  return tags;
}

}  // namespace

std::map<std::uint8_t, std::vector<std::uint64_t>> TimeTags::channels() const {
  std::map<std::uint8_t, std::vector<std::uint64_t>> out;
  for (const auto& r : records) out[r.channel].push_back(r.timestamp_ps);
  return out;
}

std::string encode_ptag(const PhotonStream& records, std::uint64_t resolution_ps) {
  std::string out;
  out.reserve(kTagHeaderBytes + kTagRecordBytes * records.size());
  out.append(kTagMagic, 4);
  put_le<std::uint16_t>(out, kTagVersion);
  put_le<std::uint64_t>(out, resolution_ps);
  for (const auto& r : records) {
    put_le<std::uint64_t>(out, r.timestamp_ps);
    out.push_back(static_cast<char>(r.channel));
  }
  return out;
}

TimeTags decode_ptag(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTagMagic, 4) != 0) {
    throw FormatError("byte 0: bad magic, expected \"PTAG\"");
  }
  if (bytes.size() < kTagHeaderBytes) {
    throw FormatError("byte " + std::to_string(bytes.size()) + ": truncated header (" +
                      std::to_string(kTagHeaderBytes) + " bytes expected)");
  }
  auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kTagVersion) {
    throw FormatError("byte 4: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kTagVersion) + ")");
  }
  TimeTags tags;
  tags.resolution_ps = get_le<std::uint64_t>(bytes, 6);
  std::size_t body = bytes.size() - kTagHeaderBytes;
  if (body % kTagRecordBytes != 0) {
    std::size_t off = kTagHeaderBytes + body / kTagRecordBytes * kTagRecordBytes;
    throw FormatError("byte " + std::to_string(off) + ": truncated record (" +
                      std::to_string(body % kTagRecordBytes) + " of 9 bytes)");
  }
  std::size_t n = body / kTagRecordBytes;
  tags.records.resize(n);
  MonotoneCheck mono;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = kTagHeaderBytes + i * kTagRecordBytes;
    PhotonRecord r;
    r.timestamp_ps = get_le<std::uint64_t>(bytes, off);
    r.channel = static_cast<std::uint8_t>(bytes[off + 8]);
    if (!mono.accept(r)) {
      throw FormatError("byte " + std::to_string(off) + ": timestamp decreases on channel " +
                        std::to_string(r.channel) + " (record " + std::to_string(i) + ")");
    }
    tags.records[i] = r;
  }
  return tags;
}

TimeTags read_timetags(const fs::path& path) {
  if (is_csv(path)) return read_tag_csv(path);
  try {
    return decode_ptag(slurp(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_timetags(const fs::path& path, const PhotonStream& records, std::uint64_t resolution_ps) {
  if (!is_csv(path)) {
    spill(path, encode_ptag(records, resolution_ps));
    return;
  }
  std::string out = "timestamp_ps,channel\n";
  char buf[32];
  for (const auto& r : records) {
    auto end = std::to_chars(buf, buf + sizeof buf, r.timestamp_ps).ptr;
    out.append(buf, end);
    out.push_back(',');
    end = std::to_chars(buf, buf + sizeof buf, static_cast<unsigned>(r.channel)).ptr;
    out.append(buf, end);
    out.push_back('\n');
  }
  spill(path, out);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

void write_columns_csv(const fs::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw InvalidInput("csv: header/column count mismatch");
  std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n) throw InvalidInput("csv: columns differ in length");
  }
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out.push_back(',');
    out += header[j];
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out.push_back(',');
      out += format_number(columns[j][i]);
    }
    out.push_back('\n');
  }
  spill(path, out);
}

void write_histogram_csv(const fs::path& path, const Histogram& hist) {
  std::vector<double> tau(hist.size()), count(hist.size()), norm(hist.size()), sig(hist.size());
  for (std::size_t i = 0; i < hist.size(); ++i) {
    tau[i] = hist.center_ps(i);
    count[i] = static_cast<double>(hist.counts[i]);
    norm[i] = hist.normalized(i);
    sig[i] = hist.sigma(i);
  }
  write_columns_csv(path, {"tau_ps", "count", "normalized", "sigma"}, {tau, count, norm, sig});
}

CsvTable read_csv(const fs::path& path, std::size_t min_columns) {
  std::istringstream in(slurp(path));
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split_commas(t);
    if (table.header.empty()) {
      if (cols.size() < min_columns) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": header needs at least " +
                          std::to_string(min_columns) + " columns");
      }
      table.header = std::move(cols);
      continue;
    }
    if (cols.size() < min_columns || cols.size() > table.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(min_columns) + ".." + std::to_string(table.header.size()) +
                        " columns, got " + std::to_string(cols.size()));
    }
    std::vector<double> row;
    row.reserve(cols.size());
    for (const auto& c : cols) row.push_back(parse_double(c, path, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw FormatError(path.string() + ": missing header row");
  return table;
}

Spectrum read_spectrum_csv(const fs::path& path) {
  // Temperature lives in a comment line, so scan for it separately.
  Spectrum s;
  {
    std::istringstream in(slurp(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] != '#') continue;
      auto key = t.find("temperature_K=");
      if (key == std::string::npos) continue;
      s.temperature_k = parse_double(trim(t.substr(key + 14)), path, line_no);
    }
  }
  auto table = read_csv(path, 2);
  if (table.header[0] != "wavelength_nm" || table.header[1] != "counts") {
    throw FormatError(path.string() + ": expected header 'wavelength_nm,counts'");
  }
  s.samples.reserve(table.rows.size());
  for (const auto& r : table.rows) s.samples.push_back({r[0], r[1]});
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

void write_spectrum_csv(const fs::path& path, const Spectrum& spectrum) {
  std::string out;
  if (spectrum.temperature_k) out += "# temperature_K=" + format_number(*spectrum.temperature_k) + "\n";
  out += "wavelength_nm,counts\n";
  for (const auto& s : spectrum.samples) {
    out += format_number(s.wavelength_nm) + "," + format_number(s.counts) + "\n";
  }
  spill(path, out);
}

namespace {

// Third column (sigma) is optional; missing sigmas default to 1.
template <typename Point, typename Make>
std::vector<Point> read_points(const fs::path& path, const std::vector<std::string>& names,
                               Make make) {
  auto table = read_csv(path, 2);
  for (std::size_t j = 0; j < std::min(names.size(), table.header.size()); ++j) {
    if (table.header[j] != names[j]) {
      throw FormatError(path.string() + ": column " + std::to_string(j + 1) + " should be '" +
                        names[j] + "', found '" + table.header[j] + "'");
    }
  }
  std::vector<Point> pts;
  for (const auto& r : table.rows) pts.push_back(make(r[0], r[1], r.size() > 2 ? r[2] : 1.0));
  return pts;
}

}  // namespace

std::vector<SaturationPoint> read_saturation_csv(const fs::path& path) {
  return read_points<SaturationPoint>(path, {"power_mw", "rate_cps", "sigma_cps"},
                                      [](double a, double b, double c) {
                                        return SaturationPoint{a, b, c};
                                      });
}

std::vector<PolarizationPoint> read_polarization_csv(const fs::path& path) {
  return read_points<PolarizationPoint>(path, {"theta_deg", "rate_cps", "sigma_cps"},
                                        [](double a, double b, double c) {
                                          return PolarizationPoint{a, b, c};
                                        });
}

std::vector<LinewidthPoint> read_linewidth_csv(const fs::path& path) {
  return read_points<LinewidthPoint>(path, {"temperature_K", "fwhm_nm", "sigma_nm"},
                                     [](double a, double b, double c) {
                                       return LinewidthPoint{a, b, c};
                                     });
}

}  // namespace spekit
