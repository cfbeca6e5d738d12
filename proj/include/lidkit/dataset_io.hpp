#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/data.hpp"

namespace lidkit {

namespace detail {

// %.17g round-trips IEEE doubles exactly, which the reproducibility
// contract relies on.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) fail_input("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail_input("dataset line ", line_no, ": bad numeric value '", s, "'");
  }
}

}  // namespace detail

// Text format: header lines (dim, languages as lang:family pairs,
// encodings, optional speakers), then one sample per line of
// comma-separated features followed by language, encoding and optional
// speaker names. Hand-writable and diffable.
inline void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "dim " << ds.dim << "\n";
  out << "languages ";
  for (std::size_t l = 0; l < ds.taxonomy.n_languages(); ++l) {
    if (l) out << ",";
    out << ds.taxonomy.languages[l] << ":"
        << ds.taxonomy.families[ds.taxonomy.lang_to_family[l]];
  }
  out << "\n";
  out << "encodings ";
  for (std::size_t e = 0; e < ds.taxonomy.n_encodings(); ++e) {
    if (e) out << ",";
    out << ds.taxonomy.encodings[e];
  }
  out << "\n";
  if (!ds.taxonomy.speakers.empty()) {
    out << "speakers ";
    for (std::size_t s = 0; s < ds.taxonomy.n_speakers(); ++s) {
      if (s) out << ",";
      out << ds.taxonomy.speakers[s];
    }
    out << "\n";
  }
  for (const Sample& s : ds.samples) {
    for (double v : s.features) out << detail::format_double(v) << ",";
    out << ds.taxonomy.languages[s.language] << ","
        << ds.taxonomy.encodings[s.encoding];
    if (s.speaker) out << "," << ds.taxonomy.speakers[*s.speaker];
    out << "\n";
  }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_input("cannot open '", path, "' for writing");
  write_dataset(ds, out);
  if (!out) fail_input("write to '", path, "' failed");
}

inline Dataset load_dataset(std::istream& in, const std::string& origin) {
  Dataset ds;
  Taxonomy& t = ds.taxonomy;
  bool have_dim = false, have_langs = false, have_encs = false;
  bool in_data = false;
  std::string line;
  std::size_t line_no = 0;
  auto fail_at = [&](const std::string& msg) -> void {
    fail_input(origin, " line ", line_no, ": ", msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::string key = s.substr(0, s.find(' '));
    if (!in_data &&
        (key == "dim" || key == "languages" || key == "encodings" ||
         key == "speakers")) {
      std::string rest = detail::trim(s.substr(key.size()));
      if (rest.empty()) fail_at(cat("empty '", key, "' header"));
      if (key == "dim") {
        long v = 0;
        try {
          v = std::stol(rest);
        } catch (const std::exception&) {
          v = 0;
        }
        if (v <= 0) fail_at(cat("bad dim '", rest, "'"));
        ds.dim = static_cast<std::size_t>(v);
        have_dim = true;
      } else if (key == "languages") {
        for (const std::string& pair : detail::split(rest, ',')) {
          std::size_t colon = pair.find(':');
          if (colon == std::string::npos || colon == 0 ||
              colon + 1 == pair.size())
            fail_at(cat("bad language:family pair '", pair, "'"));
          std::string lang = detail::trim(pair.substr(0, colon));
          std::string fam = detail::trim(pair.substr(colon + 1));
          std::size_t fi = 0;
          for (; fi < t.families.size(); ++fi)
            if (t.families[fi] == fam) break;
          if (fi == t.families.size()) t.families.push_back(fam);
          t.languages.push_back(lang);
          t.lang_to_family.push_back(fi);
        }
        have_langs = true;
      } else if (key == "encodings") {
        for (const std::string& e : detail::split(rest, ','))
          t.encodings.push_back(detail::trim(e));
        have_encs = true;
      } else {
        for (const std::string& sp : detail::split(rest, ','))
          t.speakers.push_back(detail::trim(sp));
      }
      continue;
    }
    // first data row
    if (!in_data) {
      if (!have_dim) fail_at("missing 'dim' header");
      if (!have_langs) fail_at("missing 'languages' header");
      if (!have_encs) fail_at("missing 'encodings' header");
      try {
        validate(t);
      } catch (const std::exception& e) {
        fail_input(origin, ": ", e.what());
      }
      in_data = true;
    }
    std::vector<std::string> fields = detail::split(s, ',');
    bool with_speaker = fields.size() == ds.dim + 3;
    if (!with_speaker && fields.size() != ds.dim + 2)
      fail_at(cat("row has ", fields.size(), " fields, expected ", ds.dim + 2,
                  " or ", ds.dim + 3));
    Sample sample;
    sample.features.resize(ds.dim);
    for (std::size_t j = 0; j < ds.dim; ++j)
      sample.features[j] = detail::parse_double(fields[j], line_no);
    std::string lang = detail::trim(fields[ds.dim]);
    std::string enc = detail::trim(fields[ds.dim + 1]);
    try {
      sample.language = language_index(t, lang);
      sample.encoding = encoding_index(t, enc);
    } catch (const std::exception& e) {
      fail_at(e.what());
    }
    if (with_speaker) {
      std::string spk = detail::trim(fields[ds.dim + 2]);
      std::size_t si = 0;
      for (; si < t.speakers.size(); ++si)
        if (t.speakers[si] == spk) break;
      if (si == t.speakers.size())
        fail_at(cat("unknown speaker '", spk, "'"));
      sample.speaker = si;
    }
    ds.samples.push_back(std::move(sample));
  }
  if (!in_data) {
    if (!have_dim || !have_langs || !have_encs)
      fail_input(origin, ": incomplete header (need dim, languages, encodings)");
    validate(t);
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_input("cannot open dataset file '", path, "'");
  return load_dataset(in, path);
}

}  // namespace lidkit
