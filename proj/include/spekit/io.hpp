#pragma once

// File formats.
//
// PTAG time-tag file (all integers little-endian):
//   offset 0   char[4]  "PTAG"
//   offset 4   u16      version (= 1)
//   offset 6   u64      resolution_ps (tagger quantization; timestamps are in ps)
//   offset 14  records  { u64 timestamp_ps, u8 channel } packed, 9 bytes each
//
// A ".csv" path switches readers and writers to the text form with header
// `timestamp_ps,channel`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spekit/correlate.hpp"
#include "spekit/fitters.hpp"
#include "spekit/simulate.hpp"
#include "spekit/spectra.hpp"

namespace spekit {

inline constexpr char kTagMagic[4] = {'P', 'T', 'A', 'G'};
inline constexpr std::uint16_t kTagVersion = 1;
inline constexpr std::size_t kTagHeaderBytes = 14;
inline constexpr std::size_t kTagRecordBytes = 9;

struct TimeTags {
  std::uint64_t resolution_ps = 1;
  PhotonStream records;  ///< file order

  /// Timestamps per channel id.
  std::map<std::uint8_t, std::vector<std::uint64_t>> channels() const;
};

/// Throws FormatError (bad magic, version, truncation, per-channel time
/// reversal) with the byte offset or line number, IoError when unreadable.
TimeTags read_timetags(const std::filesystem::path& path);
void write_timetags(const std::filesystem::path& path, const PhotonStream& records,
                    std::uint64_t resolution_ps = 1);

/// In-memory PTAG encoding, exposed for tests and bindings.
std::string encode_ptag(const PhotonStream& records, std::uint64_t resolution_ps = 1);
TimeTags decode_ptag(const std::string& bytes);

/// `tau_ps,count,normalized,sigma` with tau at the bin centre.
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist);

/// `wavelength_nm,counts`, optional `# temperature_K=<value>` comment line.
Spectrum read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);

/// Numeric CSV with a header row. Returns one vector per data row; rows must
/// have between `min_columns` and header-size columns.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path, std::size_t min_columns);

/// Writes columns of equal length under the given header names.
void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

std::vector<SaturationPoint> read_saturation_csv(const std::filesystem::path& path);
std::vector<PolarizationPoint> read_polarization_csv(const std::filesystem::path& path);
std::vector<LinewidthPoint> read_linewidth_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form ("nan"/"inf" spelled out).
std::string format_number(double v);

}  // namespace spekit
