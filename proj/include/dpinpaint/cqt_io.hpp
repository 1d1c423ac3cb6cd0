// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Coefficient files. The dB dump writes one CSV per octave (rows = bins,
// columns = frames) for plotting. The raw dump keeps full precision so that
// `transform inverse` can rebuild the signal.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dpinpaint/common.hpp"
#include "dpinpaint/cqt.hpp"

namespace dpinpaint {

inline std::string params_header(const CqtParams& p) {
  std::ostringstream s;
  s.precision(17);
  s << "sample_rate=" << p.sample_rate << " bins_per_octave=" << p.bins_per_octave
    << " num_octaves=" << p.num_octaves << " f_min=" << p.lowest_center()
    << " signal_length=" << p.signal_length;
  return s.str();
}

inline CqtParams parse_params_header(const std::string& line) {
  CqtParams p;
  std::istringstream s(line);
  std::string tok;
  int seen = 0;
  while (s >> tok) {
    if (tok == "#") continue;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "sample_rate") p.sample_rate = std::stod(val), ++seen;
      else if (key == "bins_per_octave") p.bins_per_octave = std::stoi(val), ++seen;
      else if (key == "num_octaves") p.num_octaves = std::stoi(val), ++seen;
      else if (key == "f_min") p.f_min = std::stod(val), ++seen;
      else if (key == "signal_length") p.signal_length = std::stoull(val), ++seen;
    } catch (const std::exception&) {
      throw ValidationError("coefficient header: bad value for " + key);
    }
  }
  require(seen == 5, "coefficient header: missing plan parameters");
  return p;
}

/// Writes `<prefix>_octave<j>.csv` for every octave; returns the paths.
inline std::vector<std::string> write_coeff_db_csv(const std::string& prefix,
                                                   const CqtPlan& plan,
                                                   const OctaveCoeffs& c,
                                                   double floor = 1e-8) {
  std::vector<std::string> paths;
  for (std::size_t j = 0; j < c.num_octaves(); ++j) {
    const std::string path = prefix + "_octave" + std::to_string(j) + ".csv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# " << params_header(plan.params()) << " octave=" << j
        << " hop=" << plan.hop(static_cast<int>(j)) << " frames=" << c.frames[j]
        << " first_center_hz=" << plan.center_frequency(static_cast<int>(j) * c.bins_per_octave)
        << " unit=dB\n";
    out.precision(6);
    for (int b = 0; b < c.bins_per_octave; ++b) {
      const auto row = c.row(j, b);
      for (std::size_t t = 0; t < row.size(); ++t) {
        if (t) out << ',';
        out << 20.0 * std::log10(std::abs(row[t]) + floor);
      }
      out << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

/// Header line with plan params, then "octave,bin,frame,re,im" rows.
inline void write_coeff_raw(const std::string& path, const CqtPlan& plan,
                            const OctaveCoeffs& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# " << params_header(plan.params()) << '\n';
  out << "octave,bin,frame,re,im\n";
  out.precision(17);
  for (std::size_t j = 0; j < c.num_octaves(); ++j)
    for (int b = 0; b < c.bins_per_octave; ++b) {
      const auto row = c.row(j, b);
      for (std::size_t t = 0; t < row.size(); ++t)
        out << j << ',' << b << ',' << t << ',' << row[t].real() << ','
            << row[t].imag() << '\n';
    }
}

struct RawCoeffs {
  CqtParams params;
  OctaveCoeffs coeffs;
};

inline RawCoeffs read_coeff_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#", 0) != 0)
    throw ValidationError(path + ": missing parameter header");
  RawCoeffs r;
  r.params = parse_params_header(line);
  const CqtPlan plan(r.params);
  r.coeffs = plan.zeros();
  std::getline(in, line);  // column names
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream s(line);
    long j = -1, b = -1, t = -1;
    double re = 0.0, im = 0.0;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    s >> j >> c1 >> b >> c2 >> t >> c3 >> re >> c4 >> im;
    if (!s || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || j < 0 ||
        j >= r.params.num_octaves || b < 0 || b >= r.params.bins_per_octave ||
        t < 0 || static_cast<std::size_t>(t) >= r.coeffs.frames[j])
      throw ValidationError(path + ": malformed row '" + line + "'");
    r.coeffs.at(j, b, t) = {re, im};
    ++rows;
  }
  require(rows == r.coeffs.size(), path + ": expected " +
                                       std::to_string(r.coeffs.size()) +
                                       " coefficient rows, got " +
                                       std::to_string(rows));
  return r;
}

}  // namespace dpinpaint
