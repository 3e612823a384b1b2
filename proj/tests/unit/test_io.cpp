#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "spekit/config.hpp"
#include "spekit/errors.hpp"
#include "spekit/io.hpp"

using namespace spekit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("spekit_io_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void put(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

void le(std::string& s, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string header(std::uint16_t version = 1, std::uint64_t res = 1) {
  std::string s = "PTAG";
  le(s, version, 2);
  le(s, res, 8);
  return s;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("hand-built tag file decodes") {
  std::string b = header(1, 4);
  le(b, 100, 8);
  b.push_back(0);
  le(b, 0x0102030405ULL, 8);
  b.push_back(1);
  le(b, 250, 8);
  b.push_back(0);
  REQUIRE(b.size() == 14 + 3 * 9);
  auto t = decode_ptag(b);
  CHECK(t.resolution_ps == 4);
  REQUIRE(t.records.size() == 3);
  CHECK(t.records[1].timestamp_ps == 0x0102030405ULL);
  CHECK(t.records[1].channel == 1);
  auto ch = t.channels();
  CHECK(ch[0] == std::vector<std::uint64_t>{100, 250});
  CHECK(ch[1] == std::vector<std::uint64_t>{0x0102030405ULL});
  CHECK(encode_ptag(t.records, 4) == b);
}

TEST_CASE("tag round trips") {
  TempDir dir;
  std::mt19937_64 rng(1);
  PhotonStream s;
  std::uint64_t t = 0;
  for (int i = 0; i < 1000; ++i) {
    t += rng() % 100000;
    s.push_back({t, static_cast<std::uint8_t>(rng() % 2)});
  }
  write_timetags(dir / "a.ptag", s, 1);
  CHECK(read_timetags(dir / "a.ptag").records == s);
  write_timetags(dir / "a.csv", s, 1);
  CHECK(read_timetags(dir / "a.csv").records == s);

  write_timetags(dir / "empty.ptag", {}, 1);
  CHECK(fs::file_size(dir / "empty.ptag") == kTagHeaderBytes);
  CHECK(read_timetags(dir / "empty.ptag").records.empty());
}

TEST_CASE("malformed tag files name the offending byte") {
  std::string good = header();
  le(good, 10, 8);
  good.push_back(0);

  std::string magic = good;
  magic[0] = 'X';
  CHECK(error_of([&] { decode_ptag(magic); }).find("byte 0") != std::string::npos);

  std::string version = header(2);
  CHECK(error_of([&] { decode_ptag(version); }).find("byte 4") != std::string::npos);

  std::string trunc = good + std::string("\x05\x00", 2);
  CHECK(error_of([&] { decode_ptag(trunc); }).find("byte 23") != std::string::npos);
  CHECK(error_of([&] { decode_ptag(std::string("PTA")); }).find("byte") != std::string::npos);

  std::string back = good;
  le(back, 5, 8);
  back.push_back(0);
  CHECK(error_of([&] { decode_ptag(back); }).find("byte 23") != std::string::npos);
  // Decreasing across channels is fine.
  std::string other = good;
  le(other, 5, 8);
  other.push_back(1);
  CHECK(decode_ptag(other).records.size() == 2);

  TempDir dir;
  put(dir / "bad.csv", "timestamp_ps,channel\n10,0\n5,0\n");
  CHECK(error_of([&] { read_timetags(dir / "bad.csv"); }).find(":3:") != std::string::npos);
  put(dir / "nan.csv", "timestamp_ps,channel\n10,0\nabc,1\n");
  CHECK(error_of([&] { read_timetags(dir / "nan.csv"); }).find(":3:") != std::string::npos);
  CHECK_THROWS_AS(read_timetags(dir / "missing.ptag"), IoError);
}

TEST_CASE("spectrum and point files") {
  TempDir dir;
  Spectrum s;
  s.temperature_k = 18.0;
  for (int i = 0; i < 10; ++i) s.samples.push_back({570.0 + 0.1 * i, 100.0 + i * 0.25});
  write_spectrum_csv(dir / "s.csv", s);
  auto r = read_spectrum_csv(dir / "s.csv");
  REQUIRE(r.samples.size() == 10);
  CHECK(r.temperature_k == 18.0);
  for (int i = 0; i < 10; ++i) {
    CHECK(r.samples[i].wavelength_nm == s.samples[i].wavelength_nm);
    CHECK(r.samples[i].counts == s.samples[i].counts);
  }

  put(dir / "sat.csv", "power_mw,rate_cps,sigma_cps\n0.1,1000,30\n0.2,1900,40\n");
  auto sat = read_saturation_csv(dir / "sat.csv");
  REQUIRE(sat.size() == 2);
  CHECK(sat[1].sigma_cps == 40.0);
  put(dir / "pol.csv", "theta_deg,rate_cps\n0,10\n10,20\n");
  CHECK(read_polarization_csv(dir / "pol.csv")[0].sigma_cps == 1.0);
  put(dir / "lw.csv", "temperature_K,fwhm_nm,sigma_nm\n18,0.1,0.01\n");
  CHECK(read_linewidth_csv(dir / "lw.csv")[0].temperature_k == 18.0);
  put(dir / "wrong.csv", "power,rate\n1,2\n");
  CHECK_THROWS_AS(read_saturation_csv(dir / "wrong.csv"), FormatError);

  write_columns_csv(dir / "c.csv", {"x", "y"}, {{1.0, 2.0}, {0.1, 1e-300}});
  auto t = read_csv(dir / "c.csv", 2);
  CHECK(t.header == std::vector<std::string>{"x", "y"});
  CHECK(t.rows[1][1] == 1e-300);
  CHECK(t.rows[0][1] == 0.1);
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-17, 0.0}) {
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("configuration") {
  auto d = RunConfig::defaults();
  CHECK(config_to_json(parse_config("{}")) == config_to_json(d));
  auto again = parse_config(config_to_json(d));
  CHECK(config_to_json(again) == config_to_json(d));

  auto c = parse_config(R"({"rates": {"gamma_ge": 0.05}, "correlation": {"mode": "start_stop"}})");
  CHECK(c.rates.gamma_ge == 0.05);
  CHECK_FALSE(c.pump.power_mw.has_value());
  CHECK(c.correlation.mode == CorrelationMode::kStartStop);

  CHECK_THROWS_AS(parse_config(R"({"rates": {"gamma_eq": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"rates": {"gamma_eg": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"correlation": {"bin_width_ps": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"rates": {"gamma_eg": "fast"}})"), ConfigError);
}

}  // TEST_SUITE
