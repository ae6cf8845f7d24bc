#include "core/dataset.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "core/csv.hpp"
#include "core/error.hpp"

namespace pmspde {

const char* stratum_name(Stratum s) {
  switch (s) {
    case Stratum::urban:
      return "urban";
    case Stratum::suburban:
      return "suburban";
    case Stratum::rural:
      return "rural";
  }
  return "urban";
}

std::optional<Stratum> parse_stratum(std::string_view s) {
  if (s == "urban") return Stratum::urban;
  if (s == "suburban") return Stratum::suburban;
  if (s == "rural") return Stratum::rural;
  return std::nullopt;
}

int days_in_month(int year, int month) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) throw invalid_argument("month must be in 1..12");
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return (month == 2 && leap) ? 29 : days[month - 1];
}

std::optional<Date> parse_date(std::string_view s) {
  // YYYY-MM-DD, optionally followed by a time part.
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  Date d;
  auto num = [&](size_t pos, size_t len, int& out) {
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc() && p == s.data() + pos + len;
  };
  if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
  if (d.month < 1 || d.month > 12) return std::nullopt;
  if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return std::nullopt;
  return d;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

int Dataset::find_station(std::string_view id) const {
  for (size_t i = 0; i < stations.size(); ++i) {
    if (stations[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Station> load_stations(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const int cid = t.require("station_id"), cx = t.require("x_km"), cy = t.require("y_km"),
            cs = t.require("stratum");
  std::vector<Station> out;
  std::unordered_map<std::string, int> seen;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    Station s;
    s.id = t.cell(r, cid);
    if (s.id.empty() || !seen.emplace(s.id, 0).second) {
      throw schema_error(t.source() + ": line " + std::to_string(t.line_of(r)) +
                         ": empty or duplicate station_id '" + s.id + "'");
    }
    s.location = {t.number(r, cx), t.number(r, cy)};
    const auto st = parse_stratum(t.cell(r, cs));
    if (!st) {
      throw schema_error(t.source() + ": line " + std::to_string(t.line_of(r)) +
                         ": stratum must be urban, suburban or rural");
    }
    s.stratum = *st;
    out.push_back(std::move(s));
  }
  return out;
}

Dataset load_dataset(const DatasetPaths& paths, int month, std::optional<int> year) {
  if (month < 1 || month > 12) throw invalid_argument("month must be in 1..12");
  Dataset data;
  data.month = month;
  data.stations = load_stations(paths.stations);
  std::unordered_map<std::string, int> station_index;
  for (size_t i = 0; i < data.stations.size(); ++i) station_index[data.stations[i].id] = static_cast<int>(i);

  const auto obs = csv::Table::read(paths.observations);
  const int oid = obs.require("station_id"), odate = obs.require("date"), oval = obs.require("pm10");
  auto date_at = [](const csv::Table& t, size_t r, int col) {
    const auto d = parse_date(t.cell(r, col));
    if (!d) {
      throw schema_error(t.source() + ": line " + std::to_string(t.line_of(r)) +
                         ": invalid ISO-8601 date '" + t.cell(r, col) + "'");
    }
    return *d;
  };
  if (!year) {
    for (size_t r = 0; r < obs.num_rows() && !year; ++r) {
      const Date d = date_at(obs, r, odate);
      if (d.month == month) year = d.year;
    }
  }
  data.year = year.value_or(2015);
  data.num_days = days_in_month(data.year, month);

  std::map<std::pair<int, int>, size_t> row_of;  // (station, day) -> row
  for (size_t r = 0; r < obs.num_rows(); ++r) {
    const Date d = date_at(obs, r, odate);
    if (d.year != data.year || d.month != month) continue;
    const auto it = station_index.find(obs.cell(r, oid));
    if (it == station_index.end()) {
      throw schema_error(obs.source() + ": line " + std::to_string(obs.line_of(r)) +
                         ": unknown station_id '" + obs.cell(r, oid) + "'");
    }
    if (obs.blank(r, oval)) continue;
    const double v = obs.number(r, oval);
    if (v < 0.0) {
      throw schema_error(obs.source() + ": line " + std::to_string(obs.line_of(r)) +
                         ": negative pm10");
    }
    const auto key = std::make_pair(it->second, d.day - 1);
    if (row_of.count(key)) {
      throw schema_error(obs.source() + ": line " + std::to_string(obs.line_of(r)) +
                         ": duplicate station/date");
    }
    row_of[key] = data.rows.size();
    data.rows.push_back({it->second, d.day - 1, v, {}});
  }

  if (!paths.covariates.empty()) {
    const auto cov = csv::Table::read(paths.covariates);
    const int cid = cov.require("station_id"), cdate = cov.require("date");
    std::vector<int> cols;
    for (size_t c = 0; c < cov.header().size(); ++c) {
      if (static_cast<int>(c) == cid || static_cast<int>(c) == cdate) continue;
      cols.push_back(static_cast<int>(c));
      data.covariate_names.push_back(cov.header()[c]);
    }
    for (auto& row : data.rows) {
      row.covariates.assign(cols.size(), std::numeric_limits<double>::quiet_NaN());
    }
    for (size_t r = 0; r < cov.num_rows(); ++r) {
      const Date d = date_at(cov, r, cdate);
      if (d.year != data.year || d.month != month) continue;
      const auto it = station_index.find(cov.cell(r, cid));
      if (it == station_index.end()) continue;
      const auto rit = row_of.find({it->second, d.day - 1});
      if (rit == row_of.end()) continue;
      auto& row = data.rows[rit->second];
      for (size_t k = 0; k < cols.size(); ++k) {
        if (!cov.blank(r, cols[k])) row.covariates[k] = cov.number(r, cols[k]);
      }
    }
  }
  return data;
}

void save_dataset(const Dataset& data, const DatasetPaths& paths) {
  {
    csv::Writer w(paths.stations);
    w.header({"station_id", "x_km", "y_km", "stratum"});
    for (const auto& s : data.stations) w.row(s.id, s.location.x, s.location.y, stratum_name(s.stratum));
    w.close();
  }
  auto date_of = [&](int day) { return format_date({data.year, data.month, day + 1}); };
  {
    csv::Writer w(paths.observations);
    w.header({"station_id", "date", "pm10", "log_pm10"});
    for (const auto& r : data.rows) {
      w.row(data.stations[r.station].id, date_of(r.day), r.value, std::log(r.value));
    }
    w.close();
  }
  if (!paths.covariates.empty()) {
    csv::Writer w(paths.covariates);
    std::vector<std::string> header{"station_id", "date"};
    header.insert(header.end(), data.covariate_names.begin(), data.covariate_names.end());
    w.header(header);
    for (const auto& r : data.rows) {
      std::vector<std::string> fields{data.stations[r.station].id, date_of(r.day)};
      for (double v : r.covariates) fields.push_back(csv::format_double(v));
      w.cells(fields);
    }
    w.close();
  }
}

Dataset subset_stations(const Dataset& data, const std::vector<int>& keep) {
  Dataset out;
  out.year = data.year;
  out.month = data.month;
  out.num_days = data.num_days;
  out.covariate_names = data.covariate_names;
  std::vector<int> remap(data.stations.size(), -1);
  for (int s : keep) {
    remap[s] = static_cast<int>(out.stations.size());
    out.stations.push_back(data.stations[s]);
  }
  for (const auto& r : data.rows) {
    if (remap[r.station] < 0) continue;
    ObservationRow copy = r;
    copy.station = remap[r.station];
    out.rows.push_back(std::move(copy));
  }
  return out;
}

}  // namespace pmspde
