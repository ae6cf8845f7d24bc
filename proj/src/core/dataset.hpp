#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/geometry.hpp"

namespace pmspde {

enum class Stratum { urban, suburban, rural };

const char* stratum_name(Stratum s);
std::optional<Stratum> parse_stratum(std::string_view s);

struct Station {
  std::string id;
  geometry::Point location;
  Stratum stratum = Stratum::urban;
};

struct Date {
  int year = 2015;
  int month = 1;
  int day = 1;
};

int days_in_month(int year, int month);
std::optional<Date> parse_date(std::string_view s);
std::string format_date(const Date& d);

// One station-day of one month. `value` is the raw concentration in µg/m³.
struct ObservationRow {
  int station = 0;
  int day = 0;  // 0-based day of month
  double value = 0.0;
  std::vector<double> covariates;  // NaN marks a missing value
};

// Observations of a single month.
struct Dataset {
  int year = 2015;
  int month = 1;
  int num_days = 31;
  std::vector<Station> stations;
  std::vector<std::string> covariate_names;
  std::vector<ObservationRow> rows;

  int find_station(std::string_view id) const;
};

struct DatasetPaths {
  std::filesystem::path stations;
  std::filesystem::path observations;
  std::filesystem::path covariates;  // optional: empty means no predictors
};

// Stations table alone (station_id, x_km, y_km, stratum).
std::vector<Station> load_stations(const std::filesystem::path& path);

// Loads the month's rows. When `year` is absent it is taken from the first
// observation falling in `month`.
Dataset load_dataset(const DatasetPaths& paths, int month, std::optional<int> year = std::nullopt);

// Writes stations, observations (with a log_pm10 column) and covariates.
void save_dataset(const Dataset& data, const DatasetPaths& paths);

// Dataset restricted to the given station indices (order kept).
Dataset subset_stations(const Dataset& data, const std::vector<int>& keep);

}  // namespace pmspde
