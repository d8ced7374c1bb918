#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "abp/markers.hpp"

namespace abp {

/// Role of a row in the input file.
enum class Cohort {
  monitored,  // longitudinal athlete under test
  training,   // longitudinal normal athlete used only to fit population models
  baseline,   // cross-sectional reference individual (single sample)
};

std::string_view to_string(Cohort c) noexcept;

struct Athlete {
  std::string id;
  Sex sex = Sex::male;
  Cohort cohort = Cohort::monitored;
  std::vector<RawSample> samples;  // strictly increasing timestamps

  friend bool operator==(const Athlete&, const Athlete&) = default;
};

struct RejectedRow {
  std::size_t line = 0;  // 1-based line in the source
  std::string reason;
};

struct ProfileCollection {
  std::vector<Athlete> athletes;        // monitored and training series, file order
  std::vector<RawSample> baseline;      // cross-sectional population
  std::vector<RejectedRow> rejects;

  [[nodiscard]] const Athlete* find(std::string_view id) const;
  [[nodiscard]] std::size_t sample_count() const;
  [[nodiscard]] std::vector<const Athlete*> athletes_in(Cohort c) const;
};

/// Data equality (rejects are a by-product of parsing and not compared).
bool same_profiles(const ProfileCollection& a, const ProfileCollection& b);

enum class FlagEncoding {
  sentinel,      // "<LOQ" / "<LOD" written in the value cell
  flag_columns,  // companion column "<marker><suffix>" holding the flag
};

struct CsvSchema {
  FlagEncoding flags = FlagEncoding::sentinel;
  std::string flag_suffix = "_flag";
  std::string missing = "NA";
  /// Throw MalformedRow on the first bad row instead of collecting it.
  bool strict = false;
};

/// Reads a profile CSV. Required columns: athlete_id, timestamp, sex, label;
/// optional: cohort; one column per marker (code or column name). Lines
/// starting with '#' are provenance comments and are skipped.
ProfileCollection ingest_csv(std::istream& in, const CsvSchema& schema = {});
ProfileCollection ingest_csv_file(const std::string& path, const CsvSchema& schema = {});

/// Canonical serialization: fixed column order, flag columns, shortest
/// round-trip number formatting. Reading it back with
/// canonical_schema() reproduces the collection exactly.
void write_canonical_csv(std::ostream& out, const ProfileCollection& profiles);
CsvSchema canonical_schema();

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace abp
