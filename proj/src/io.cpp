#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "optd/bench.hpp"
#include "optd/progress.hpp"

namespace optd {

using nlohmann::json;

namespace {

constexpr char kMagic[5] = {'O', 'P', 'T', 'D', '1'};

bool is_binary_path(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos) return false;
  const std::string ext = path.substr(dot);
  return ext == ".bin" || ext == ".optd";
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, std::size_t& offset) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("binary dataset truncated at byte offset " + std::to_string(offset));
  offset += sizeof(T);
  return to_little(v);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view f, double& v) {
  if (!f.empty() && f.front() == '+') f.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  return ec == std::errc{} && ptr == f.data() + f.size() && !f.empty();
}

const char* kind_name(DatasetSpec::Kind k) {
  return k == DatasetSpec::Kind::File ? "file" : "synthetic-mixture";
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Status status_from(const std::string& s) {
  if (s == "converged") return Status::Converged;
  if (s == "iteration-limit") return Status::IterationLimit;
  if (s == "stalled") return Status::Stalled;
  throw ParseError("unknown status '" + s + "'");
}

}  // namespace

DesignMatrixd parse_csv(const std::string& text, const std::string& id) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  Index n = -1;
  Index rows = 0;
  long lineNo = 0;
  bool seenContent = false;
  while (std::getline(in, line)) {
    ++lineNo;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size(); ++k) numeric = numeric && parse_double(fields[k], row[k]);
    if (!numeric) {
      if (!seenContent) {  // header
        seenContent = true;
        n = static_cast<Index>(fields.size());
        continue;
      }
      throw ParseError("CSV line " + std::to_string(lineNo) + ": non-numeric field");
    }
    seenContent = true;
    if (n < 0) n = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != n) {
      throw ParseError("CSV line " + std::to_string(lineNo) + ": expected " + std::to_string(n) + " fields, got " +
                       std::to_string(row.size()));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError("CSV: no data rows");
  // Row-major in the file, one point per row -> column-major n x m.
  const Matrixd pts = Eigen::Map<const Matrixd>(values.data(), n, rows);
  return DesignMatrixd(pts, id);
}

DesignMatrixd load_dataset(const std::string& path, DataFormat format) {
  if (format == DataFormat::Auto) format = is_binary_path(path) ? DataFormat::Binary : DataFormat::Csv;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  if (format == DataFormat::Csv) {
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path);
  }
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0) throw ParseError("binary dataset: bad magic at byte offset 0");
  std::size_t offset = 5;
  const auto n = read_le<std::uint32_t>(in, offset);
  const auto m = read_le<std::uint64_t>(in, offset);
  if (n == 0 || m == 0) throw DimensionMismatch("binary dataset: zero dimension");
  Matrixd pts(static_cast<Index>(n), static_cast<Index>(m));
  const auto count = static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
  in.read(reinterpret_cast<char*>(pts.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    throw ParseError("binary dataset truncated at byte offset " +
                     std::to_string(offset + static_cast<std::size_t>(in.gcount())));
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (Index k = 0; k < pts.size(); ++k) pts.data()[k] = to_little(pts.data()[k]);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DimensionMismatch("binary dataset: trailing bytes after m*n values");
  return DesignMatrixd(std::move(pts), path);
}

void save_dataset(const DesignMatrixd& X, const std::string& path, DataFormat format) {
  if (format == DataFormat::Auto) format = is_binary_path(path) ? DataFormat::Binary : DataFormat::Csv;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  if (format == DataFormat::Binary) {
    out.write(kMagic, 5);
    write_le(out, static_cast<std::uint32_t>(X.dim()));
    write_le(out, static_cast<std::uint64_t>(X.size()));
    for (Index k = 0; k < X.points().size(); ++k) write_le(out, X.points().data()[k]);
  } else {
    char buf[32];
    for (Index i = 0; i < X.size(); ++i) {
      for (Index d = 0; d < X.dim(); ++d) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), X.points()(d, i));
        if (d > 0) out << ',';
        out.write(buf, ptr - buf);
      }
      out << '\n';
    }
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string to_json_line(const IterationRecord& rec) {
  return json{{"method", rec.method},       {"iteration", rec.iteration}, {"active", rec.activeSize},
              {"working", rec.workingSize}, {"z", rec.z},                 {"objective", rec.objective},
              {"gap", rec.gap}}
      .dump();
}

std::string result_to_json(const RunResult& r, bool withTimes) {
  json reports = json::array();
  for (const auto& s : r.reports) {
    json j{{"method", s.method},         {"objective", number(s.objective)},
           {"dualityGap", number(s.dualityGap)}, {"iterations", s.iterations},
           {"supportSize", s.supportSize}, {"eliminated", s.eliminated},
           {"status", to_string(s.status)}};
    if (withTimes) j["wallTime"] = s.wallTime;
    reports.push_back(std::move(j));
  }
  json design = json::array();
  for (const auto& [i, c] : r.design) design.push_back({i, c});
  const auto& b = r.bounds;
  json doc{
      {"spec",
       {{"kind", kind_name(r.spec.kind)},
        {"n", r.spec.n},
        {"m", r.spec.m},
        {"seed", r.spec.seed},
        {"p", r.spec.p},
        {"path", r.spec.path}}},
      {"method", r.method},
      {"N", r.N},
      {"reports", std::move(reports)},
      {"bounds",
       {{"phiRel", number(b.phiRel)},
        {"hNn", number(b.hNn)},
        {"lowerBound", number(b.lowerBound)},
        {"achieved", number(b.achieved)},
        {"gap", number(b.gap)},
        {"gapIsAbsolute", b.gapIsAbsolute},
        {"corollarySatisfied", b.corollarySatisfied}}},
      {"kurtosis", number(r.kurtosis)},
      {"support", r.support},
      {"design", std::move(design)},
  };
  return doc.dump(2);
}

RunResult result_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("result document: ") + e.what());
  }
  try {
    RunResult r;
    const auto& s = doc.at("spec");
    r.spec.kind = s.at("kind").get<std::string>() == "file" ? DatasetSpec::Kind::File : DatasetSpec::Kind::SyntheticMixture;
    r.spec.n = s.at("n").get<Index>();
    r.spec.m = s.at("m").get<Index>();
    r.spec.seed = s.at("seed").get<std::uint64_t>();
    r.spec.p = s.at("p").get<double>();
    r.spec.path = s.at("path").get<std::string>();
    r.method = doc.at("method").get<std::string>();
    r.N = doc.at("N").get<int>();
    for (const auto& j : doc.at("reports")) {
      SolveReport rep;
      rep.method = j.at("method").get<std::string>();
      rep.objective = number_from(j.at("objective"));
      rep.dualityGap = number_from(j.at("dualityGap"));
      rep.iterations = j.at("iterations").get<long>();
      rep.supportSize = j.at("supportSize").get<long>();
      rep.eliminated = j.at("eliminated").get<long>();
      rep.status = status_from(j.at("status").get<std::string>());
      rep.wallTime = j.value("wallTime", 0.0);
      r.reports.push_back(std::move(rep));
    }
    const auto& b = doc.at("bounds");
    r.bounds.phiRel = number_from(b.at("phiRel"));
    r.bounds.hNn = number_from(b.at("hNn"));
    r.bounds.lowerBound = number_from(b.at("lowerBound"));
    r.bounds.achieved = number_from(b.at("achieved"));
    r.bounds.gap = number_from(b.at("gap"));
    r.bounds.gapIsAbsolute = b.at("gapIsAbsolute").get<bool>();
    r.bounds.corollarySatisfied = b.at("corollarySatisfied").get<bool>();
    r.kurtosis = number_from(doc.at("kurtosis"));
    r.support = doc.at("support").get<std::vector<Index>>();
    for (const auto& pair : doc.at("design")) r.design[pair.at(0).get<Index>()] = pair.at(1).get<int>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result document: ") + e.what());
  }
}

void save_result(const RunResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << result_to_json(r) << '\n';
}

RunResult load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return result_from_json(ss.str());
}

}  // namespace optd
