#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tailhedge/calendar.hpp"
#include "tailhedge/chain.hpp"
#include "tailhedge/errors.hpp"

namespace tailhedge {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_number(const std::string& cell, long row, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + cell + "'", row, column);
  }
}

inline const std::array<const char*, 14> kOptionCsvColumns = {
    "date",  "expiry",   "option_id",   "cp_flag", "strike", "best_bid", "best_ask",
    "underlying_close", "implied_vol", "delta",   "gamma",  "vega",     "theta", "rate"};

}  // namespace detail

/// Quoted option data, external wire format. Comma separated with a required
/// header: date, expiry, option_id, cp_flag(C|P), strike, best_bid, best_ask,
/// underlying_close, implied_vol, delta, gamma, vega, theta, rate. Dates are
/// ISO-8601; implied_vol per sqrt(day); rate per day.
///
/// Rows are grouped by option, ordered by date; the quote mid (bid+ask)/2 is
/// the option price, and each record is expanded into one episode per
/// observation day before expiry.
inline std::vector<OptionEpisode> load_option_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  {
    const auto header = detail::split_csv_line(line);
    if (header.size() != detail::kOptionCsvColumns.size()) {
      throw ValidationError("header must have " +
                            std::to_string(detail::kOptionCsvColumns.size()) + " columns, got " +
                            std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] != detail::kOptionCsvColumns[i]) {
        throw ValidationError("missing or misnamed column, expected '" +
                              std::string(detail::kOptionCsvColumns[i]) + "'",
                              0, header[i]);
      }
    }
  }

  struct Row {
    long date;
    long expiry;
    bool is_call;
    double strike;
    EpisodeStep step;
    long file_row;
  };
  std::map<std::string, std::vector<Row>> by_option;

  long row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != detail::kOptionCsvColumns.size()) {
      throw ValidationError("expected " + std::to_string(detail::kOptionCsvColumns.size()) +
                            " cells, got " + std::to_string(cells.size()), row_no, "");
    }
    Row row;
    row.file_row = row_no;
    try {
      row.date = parse_iso_date(cells[0]);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), row_no, "date");
    }
    try {
      row.expiry = parse_iso_date(cells[1]);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), row_no, "expiry");
    }
    if (cells[3] != "C" && cells[3] != "P") {
      throw ValidationError("cp_flag must be C or P", row_no, "cp_flag");
    }
    row.is_call = cells[3] == "C";
    row.strike = detail::parse_number(cells[4], row_no, "strike");
    const double bid = detail::parse_number(cells[5], row_no, "best_bid");
    const double ask = detail::parse_number(cells[6], row_no, "best_ask");
    if (bid < 0.0) throw ValidationError("negative price", row_no, "best_bid");
    if (ask < 0.0) throw ValidationError("negative price", row_no, "best_ask");
    if (bid > ask) throw ValidationError("bid exceeds ask", row_no, "best_bid");
    if (row.strike <= 0.0) throw ValidationError("strike must be positive", row_no, "strike");
    row.step.date = row.date;
    row.step.option_price = 0.5 * (bid + ask);
    row.step.underlying = detail::parse_number(cells[7], row_no, "underlying_close");
    if (row.step.underlying <= 0.0) {
      throw ValidationError("negative price", row_no, "underlying_close");
    }
    row.step.implied_vol = detail::parse_number(cells[8], row_no, "implied_vol");
    row.step.delta = detail::parse_number(cells[9], row_no, "delta");
    row.step.gamma = detail::parse_number(cells[10], row_no, "gamma");
    row.step.vega = detail::parse_number(cells[11], row_no, "vega");
    row.step.theta = detail::parse_number(cells[12], row_no, "theta");
    row.step.rate = detail::parse_number(cells[13], row_no, "rate");
    by_option[cells[2]].push_back(row);
  }

  std::vector<OptionEpisode> episodes;
  for (auto& [option_id, rows] : by_option) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.date < b.date; });
    OptionEpisode record;
    record.contract.option_id = option_id;
    record.contract.is_call = rows.front().is_call;
    record.contract.strike = rows.front().strike;
    record.contract.expiry_date = rows.front().expiry;
    record.contract.list_date = rows.front().date;
    record.today = rows.front().date;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& row = rows[i];
      if (i > 0 && row.date == rows[i - 1].date) {
        throw ValidationError("non-monotone dates within option " + option_id, row.file_row,
                              "date");
      }
      if (row.expiry != record.contract.expiry_date) {
        throw ValidationError("expiry changes within option " + option_id, row.file_row, "expiry");
      }
      record.steps.push_back(row.step);
    }
    if (record.steps.back().date != record.contract.expiry_date) {
      throw ValidationError("option " + option_id + " has no expiry-day row",
                            rows.back().file_row, "date");
    }
    if (record.steps.size() < 2) continue;  // a lone expiry quote yields no hedging problem
    // the short position settles at exercise value, not at the final quote
    auto& final_step = record.steps.back();
    final_step.option_price =
        record.contract.is_call
            ? std::max(final_step.underlying - record.contract.strike, 0.0)
            : std::max(record.contract.strike - final_step.underlying, 0.0);
    record.payoff = final_step.option_price;
    const auto subpaths = extract_subpaths(record);
    episodes.insert(episodes.end(), subpaths.begin(), subpaths.end());
  }
  return episodes;
}

inline std::vector<OptionEpisode> load_option_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open option CSV: " + path);
  return load_option_csv(in);
}

// ---------------------------------------------------------------------------
// Internal episode store: a flat CSV with contract terms repeated per step.
// Unlike the quote format above it carries the model's forecast variance and
// uses raw day indices, so synthetic chains round-trip exactly.
// ---------------------------------------------------------------------------

inline void save_episodes(const std::vector<OptionEpisode>& episodes, std::ostream& out) {
  out << "option_id,is_call,strike,list_date,expiry_date,today,step,date,underlying,"
         "option_price,implied_vol,delta,gamma,vega,theta,rate,next_var\n";
  char buf[512];
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const auto& s = ep.steps[t];
      std::snprintf(buf, sizeof(buf),
                    "%s,%d,%.17g,%ld,%ld,%ld,%zu,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g,%.17g\n",
                    ep.contract.option_id.c_str(), ep.contract.is_call ? 1 : 0,
                    ep.contract.strike, ep.contract.list_date, ep.contract.expiry_date, ep.today,
                    t, s.date, s.underlying, s.option_price, s.implied_vol, s.delta, s.gamma,
                    s.vega, s.theta, s.rate, s.next_var);
      out << buf;
    }
  }
}

inline void save_episodes(const std::vector<OptionEpisode>& episodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write episode store: " + path);
  save_episodes(episodes, out);
}

inline std::vector<OptionEpisode> load_episodes(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<OptionEpisode> episodes;
  long row_no = 0;
  std::string current_key;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 17) {
      throw ValidationError("episode store row must have 17 cells", row_no, "");
    }
    const std::string key = cells[0] + "@" + cells[5];
    if (key != current_key) {
      episodes.emplace_back();
      auto& ep = episodes.back();
      ep.contract.option_id = cells[0];
      ep.contract.is_call = cells[1] == "1";
      ep.contract.strike = detail::parse_number(cells[2], row_no, "strike");
      ep.contract.list_date = static_cast<long>(detail::parse_number(cells[3], row_no, "list_date"));
      ep.contract.expiry_date =
          static_cast<long>(detail::parse_number(cells[4], row_no, "expiry_date"));
      ep.today = static_cast<long>(detail::parse_number(cells[5], row_no, "today"));
      current_key = key;
    }
    auto& ep = episodes.back();
    EpisodeStep s;
    s.date = static_cast<long>(detail::parse_number(cells[7], row_no, "date"));
    s.underlying = detail::parse_number(cells[8], row_no, "underlying");
    s.option_price = detail::parse_number(cells[9], row_no, "option_price");
    s.implied_vol = detail::parse_number(cells[10], row_no, "implied_vol");
    s.delta = detail::parse_number(cells[11], row_no, "delta");
    s.gamma = detail::parse_number(cells[12], row_no, "gamma");
    s.vega = detail::parse_number(cells[13], row_no, "vega");
    s.theta = detail::parse_number(cells[14], row_no, "theta");
    s.rate = detail::parse_number(cells[15], row_no, "rate");
    s.next_var = detail::parse_number(cells[16], row_no, "next_var");
    ep.steps.push_back(s);
    ep.payoff = s.option_price;
  }
  return episodes;
}

inline std::vector<OptionEpisode> load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open episode store: " + path);
  return load_episodes(in);
}

}  // namespace tailhedge
