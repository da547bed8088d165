#include "randt/dataset.hpp"

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>

namespace randt {

namespace {

constexpr std::string_view kScanHeader = "timestamp,azimuth_rad,range_m,intensity";
constexpr std::string_view kImuHeader = "timestamp,yaw_rate_rad_s";

template <std::size_t N>
void parse_row(std::string_view line, double (&out)[N], const std::string& where) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t end = i + 1 < N ? line.find(',', pos) : line.size();
    if (end == std::string_view::npos) throw DatasetError(where + ": expected " + std::to_string(N) + " fields");
    const char* first = line.data() + pos;
    const char* last = line.data() + end;
    const auto res = std::from_chars(first, last, out[i]);
    if (res.ec != std::errc() || res.ptr != last) throw DatasetError(where + ": malformed number");
    pos = end + 1;
  }
}

std::string_view trim_cr(const std::string& line) {
  std::string_view v(line);
  if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
  return v;
}

std::vector<RadarScan> read_scans(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot read " + path.string());
  std::vector<RadarScan> scans;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view v = trim_cr(line);
    if (line_no == 1 && v == kScanHeader) continue;
    if (v.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    double f[4];
    parse_row(v, f, where);
    if (f[2] < 0.0 || f[3] < 0.0) throw DatasetError(where + ": negative range or intensity");
    if (scans.empty() || f[0] != scans.back().timestamp) {
      if (!scans.empty() && f[0] < scans.back().timestamp) throw DatasetError(where + ": timestamps not monotone");
      scans.push_back(RadarScan{f[0], {}});
    }
    auto& beams = scans.back().beams;
    if (beams.empty() || beams.back().azimuth != f[1]) beams.push_back(Beam{f[1], {}});
    beams.back().returns.push_back({f[2], f[3]});
  }
  if (scans.empty()) throw DatasetError(path.string() + ": no scans");
  return scans;
}

std::vector<GyroSample> read_imu(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot read " + path.string());
  std::vector<GyroSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view v = trim_cr(line);
    if (line_no == 1 && v == kImuHeader) continue;
    if (v.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    double f[2];
    parse_row(v, f, where);
    if (!samples.empty() && !(f[0] > samples.back().timestamp)) throw DatasetError(where + ": timestamps not monotone");
    samples.push_back({f[0], f[1]});
  }
  return samples;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.scans = read_scans(dir / "scans.csv");
  if (std::filesystem::exists(dir / "imu.csv")) data.imu = read_imu(dir / "imu.csv");
  if (std::filesystem::exists(dir / "gt.tum")) data.ground_truth = read_tum(dir / "gt.tum");
  return data;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "scans.csv");
    if (!os) throw DatasetError("cannot write " + (dir / "scans.csv").string());
    os << kScanHeader << '\n';
    for (const auto& scan : data.scans) {
      const std::string ts = format_number(scan.timestamp);
      for (const auto& beam : scan.beams) {
        const std::string az = format_number(beam.azimuth);
        for (const auto& r : beam.returns) {
          os << ts << ',' << az << ',' << format_number(r.range) << ',' << format_number(r.intensity) << '\n';
        }
      }
    }
  }
  if (data.imu) {
    std::ofstream os(dir / "imu.csv");
    os << kImuHeader << '\n';
    for (const auto& s : *data.imu) os << format_number(s.timestamp) << ',' << format_number(s.yaw_rate) << '\n';
  }
  if (data.ground_truth) write_tum(dir / "gt.tum", *data.ground_truth);
}

}  // namespace randt
