#include "abp/profile_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>
#include <variant>

#include "abp/error.hpp"

namespace abp {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Splits one CSV line; double quotes group commas, "" escapes a quote.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<LimitFlag> parse_flag(std::string_view s) {
  const std::string t = lower(std::string(s));
  if (t.empty() || t == "measured") return LimitFlag::measured;
  if (t == "<loq" || t == "loq" || t == "below_loq") return LimitFlag::below_loq;
  if (t == "<lod" || t == "lod" || t == "below_lod") return LimitFlag::below_lod;
  return std::nullopt;
}

std::optional<Cohort> parse_cohort(std::string_view s) {
  const std::string t = lower(std::string(s));
  if (t.empty() || t == "monitored" || t == "longitudinal") return Cohort::monitored;
  if (t == "training") return Cohort::training;
  if (t == "baseline") return Cohort::baseline;
  return std::nullopt;
}

struct ColumnMap {
  int athlete_id = -1, timestamp = -1, sex = -1, label = -1, cohort = -1;
  std::array<int, kMarkerCount> value{};
  std::array<int, kMarkerCount> flag{};
  std::size_t width = 0;
};

ColumnMap map_header(const std::vector<std::string>& header, const CsvSchema& schema) {
  ColumnMap map;
  map.value.fill(-1);
  map.flag.fill(-1);
  map.width = header.size();
  const std::string suffix = lower(schema.flag_suffix);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = lower(header[i]);
    const int col = static_cast<int>(i);
    auto claim = [&](int& slot) {
      if (!(slot < 0)) fail(Errc::MalformedRow, "duplicate column '" + header[i] + "'");
      slot = col;
    };
    if (name == "athlete_id") claim(map.athlete_id);
    else if (name == "timestamp") claim(map.timestamp);
    else if (name == "sex") claim(map.sex);
    else if (name == "label") claim(map.label);
    else if (name == "cohort") claim(map.cohort);
    else if (auto m = parse_marker(header[i])) claim(map.value[index_of(*m)]);
    else if (schema.flags == FlagEncoding::flag_columns && !suffix.empty() &&
             name.size() > suffix.size() &&
             name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const auto m = parse_marker(header[i].substr(0, name.size() - suffix.size()));
      if (!(m.has_value()))
        fail(Errc::UnknownMarkerColumn,
             "unknown flag column '" + header[i] + "'");
      claim(map.flag[index_of(*m)]);
    } else {
      fail(Errc::UnknownMarkerColumn, "unknown column '" + header[i] + "'");
    }
  }
  for (auto [slot, what] : {std::pair{map.athlete_id, "athlete_id"}, std::pair{map.timestamp, "timestamp"},
                            std::pair{map.sex, "sex"}, std::pair{map.label, "label"}})
    if (!(slot >= 0))
      fail(Errc::MalformedRow,
           std::string("header lacks required column '") + what + "'");
  for (std::size_t k = 0; k < kMarkerCount; ++k)
    if (!(map.flag[k] < 0 || map.value[k] >= 0))
      fail(Errc::MalformedRow,
           "flag column for " + std::string(marker_code(kAllMarkers[k])) + " has no value column");
  return map;
}

struct ParsedRow {
  RawSample sample;
  Cohort cohort = Cohort::monitored;
};

/// Returns the parsed row or a rejection reason.
std::variant<ParsedRow, std::string> parse_row(const std::vector<std::string>& cells,
                                               const ColumnMap& map, const CsvSchema& schema) {
  if (cells.size() != map.width)
    return "expected " + std::to_string(map.width) + " fields, found " + std::to_string(cells.size());
  ParsedRow row;
  auto& s = row.sample;
  s.athlete_id = cells[static_cast<std::size_t>(map.athlete_id)];
  if (s.athlete_id.empty() || s.athlete_id == schema.missing) return std::string("empty athlete_id");
  const auto ts = parse_int(cells[static_cast<std::size_t>(map.timestamp)]);
  if (!ts) return "timestamp '" + cells[static_cast<std::size_t>(map.timestamp)] + "' is not an integer";
  s.timestamp = *ts;
  const auto sex = parse_sex(cells[static_cast<std::size_t>(map.sex)]);
  if (!sex) return "sex '" + cells[static_cast<std::size_t>(map.sex)] + "' is not M/F";
  s.sex = *sex;
  const auto& label_cell = cells[static_cast<std::size_t>(map.label)];
  if (!label_cell.empty() && label_cell != schema.missing) {
    const auto label = parse_label(label_cell);
    if (!label) return "label '" + label_cell + "' is not normal/atypical/abnormal";
    s.label = *label;
  }
  if (map.cohort >= 0) {
    const auto cohort = parse_cohort(cells[static_cast<std::size_t>(map.cohort)]);
    if (!cohort) return "cohort '" + cells[static_cast<std::size_t>(map.cohort)] + "' is unknown";
    row.cohort = *cohort;
  }
  for (Marker m : kAllMarkers) {
    const int vcol = map.value[index_of(m)];
    if (vcol < 0) continue;
    const std::string& cell = cells[static_cast<std::size_t>(vcol)];
    std::optional<double> value;
    LimitFlag flag = LimitFlag::measured;
    const bool missing = cell.empty() || cell == schema.missing;
    if (!missing) {
      if (const auto sentinel = parse_flag(cell);
          schema.flags == FlagEncoding::sentinel && sentinel && *sentinel != LimitFlag::measured &&
          !parse_double(cell)) {
        flag = *sentinel;
        value = 0.0;
      } else if (auto v = parse_double(cell)) {
        value = *v;
      } else {
        return std::string(marker_code(m)) + " value '" + cell + "' is not numeric";
      }
    }
    if (const int fcol = map.flag[index_of(m)]; fcol >= 0) {
      const std::string& fcell = cells[static_cast<std::size_t>(fcol)];
      if (!(fcell == schema.missing)) {
        const auto f = parse_flag(fcell);
        if (!f) return std::string(marker_code(m)) + " flag '" + fcell + "' is not recognised";
        if (*f != LimitFlag::measured) {
          flag = *f;
          if (!value) value = 0.0;
        }
      }
    }
    if (!value) continue;
    if (flag == LimitFlag::measured && !(*value > 0.0))
      return std::string(marker_code(m)) + " measured value must be positive";
    if (flag != LimitFlag::measured && *value < 0.0)
      return std::string(marker_code(m)) + " flagged value must not be negative";
    s.at(m) = MarkerReading{*value, flag};
  }
  return row;
}

void check_unique_timestamps(const std::vector<RawSample>& sorted, const std::string& what) {
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i].timestamp != sorted[i - 1].timestamp))
      fail(Errc::DuplicateTimestamp,
           what + " '" + sorted[i].athlete_id + "' has two samples at timestamp " +
             std::to_string(sorted[i].timestamp));
}

}  // namespace

std::string_view to_string(Cohort c) noexcept {
  switch (c) {
    case Cohort::monitored: return "monitored";
    case Cohort::training: return "training";
    case Cohort::baseline: return "baseline";
  }
  return "?";
}

const Athlete* ProfileCollection::find(std::string_view id) const {
  for (const auto& a : athletes)
    if (a.id == id) return &a;
  return nullptr;
}

std::size_t ProfileCollection::sample_count() const {
  std::size_t n = baseline.size();
  for (const auto& a : athletes) n += a.samples.size();
  return n;
}

std::vector<const Athlete*> ProfileCollection::athletes_in(Cohort c) const {
  std::vector<const Athlete*> out;
  for (const auto& a : athletes)
    if (a.cohort == c) out.push_back(&a);
  return out;
}

bool same_profiles(const ProfileCollection& a, const ProfileCollection& b) {
  return a.athletes == b.athletes && a.baseline == b.baseline;
}

ProfileCollection ingest_csv(std::istream& in, const CsvSchema& schema) {
  ProfileCollection out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<ColumnMap> map;
  std::unordered_map<std::string, std::size_t> athlete_index;
  std::map<std::string, std::vector<RawSample>> baseline_by_id;
  std::vector<std::string> baseline_order;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv(line);
    if (!map) {
      map = map_header(cells, schema);
      continue;
    }
    auto parsed = parse_row(cells, *map, schema);
    if (auto* reason = std::get_if<std::string>(&parsed)) {
      if (schema.strict) fail(Errc::MalformedRow, "line " + std::to_string(line_no) + ": " + *reason);
      out.rejects.push_back({line_no, *reason});
      continue;
    }
    auto& row = std::get<ParsedRow>(parsed);
    if (row.cohort == Cohort::baseline) {
      auto [it, fresh] = baseline_by_id.try_emplace(row.sample.athlete_id);
      if (fresh) baseline_order.push_back(row.sample.athlete_id);
      it->second.push_back(std::move(row.sample));
      continue;
    }
    auto [it, fresh] = athlete_index.try_emplace(row.sample.athlete_id, out.athletes.size());
    if (fresh) {
      out.athletes.push_back(Athlete{row.sample.athlete_id, row.sample.sex, row.cohort, {}});
    }
    Athlete& athlete = out.athletes[it->second];
    if (athlete.sex != row.sample.sex || athlete.cohort != row.cohort) {
      const std::string reason = "athlete '" + athlete.id + "' changes sex or cohort between rows";
      if (schema.strict) fail(Errc::MalformedRow, "line " + std::to_string(line_no) + ": " + reason);
      out.rejects.push_back({line_no, reason});
      continue;
    }
    athlete.samples.push_back(std::move(row.sample));
  }
  require(map.has_value(), Errc::MalformedRow, "input has no header row");

  auto by_time = [](const RawSample& x, const RawSample& y) { return x.timestamp < y.timestamp; };
  for (auto& a : out.athletes) {
    std::stable_sort(a.samples.begin(), a.samples.end(), by_time);
    check_unique_timestamps(a.samples, "athlete");
  }
  for (const auto& id : baseline_order) {
    auto& samples = baseline_by_id[id];
    std::stable_sort(samples.begin(), samples.end(), by_time);
    check_unique_timestamps(samples, "baseline individual");
    for (auto& s : samples) out.baseline.push_back(std::move(s));
  }
  return out;
}

ProfileCollection ingest_csv_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!(in.good())) fail(Errc::IoError, "cannot open '" + path + "'");
  return ingest_csv(in, schema);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

CsvSchema canonical_schema() {
  CsvSchema s;
  s.flags = FlagEncoding::flag_columns;
  s.strict = true;
  return s;
}

void write_canonical_csv(std::ostream& out, const ProfileCollection& profiles) {
  out << "cohort,athlete_id,timestamp,sex,label";
  for (Marker m : kAllMarkers) out << ',' << marker_column(m) << ',' << marker_column(m) << "_flag";
  out << '\n';
  auto write_row = [&out](Cohort cohort, const RawSample& s) {
    out << to_string(cohort) << ',' << s.athlete_id << ',' << s.timestamp << ',' << to_string(s.sex)
        << ',' << (s.label ? std::string(to_string(*s.label)) : std::string("NA"));
    for (Marker m : kAllMarkers) {
      const auto& r = s.at(m);
      if (!r) {
        out << ",NA,NA";
      } else {
        out << ',' << format_double(r->raw) << ','
            << (r->flag == LimitFlag::measured ? std::string_view() : to_string(r->flag));
      }
    }
    out << '\n';
  };
  for (const auto& a : profiles.athletes)
    for (const auto& s : a.samples) write_row(a.cohort, s);
  for (const auto& s : profiles.baseline) write_row(Cohort::baseline, s);
}

}  // namespace abp
