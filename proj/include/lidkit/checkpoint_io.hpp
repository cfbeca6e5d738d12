#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/dataset_io.hpp"
#include "lidkit/haus.hpp"

namespace lidkit {

namespace detail {

inline void write_le_double(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char bytes[8];
  for (int i = 0; i < 8; ++i)
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

inline double read_le_double(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) fail_input("checkpoint: truncated parameter block");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i]))
            << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline std::string dims_string(const Mlp& m) {
  if (m.layers.empty()) return "-";
  std::string s = cat(m.layers.front().in_dim());
  for (const LinearLayer& l : m.layers) s += cat(",", l.out_dim());
  return s;
}

inline std::vector<std::size_t> parse_dims(const std::string& s,
                                           const char* what) {
  std::vector<std::size_t> dims;
  if (s == "-") return dims;
  for (const std::string& part : split(s, ',')) {
    long v = 0;
    try {
      v = std::stol(part);
    } catch (const std::exception&) {
      v = 0;
    }
    if (v <= 0) fail_input("checkpoint: bad ", what, " dims '", s, "'");
    dims.push_back(static_cast<std::size_t>(v));
  }
  return dims;
}

}  // namespace detail

// Checkpoint: a text manifest (format version, eta, coupling flag, layer
// dims per component, taxonomy) followed by the flat parameter vector as
// little-endian 64-bit reals in flatten_params order. Self-describing:
// loading needs no training config.
inline void save_checkpoint(const HausModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_input("cannot open '", path, "' for writing");
  out << "lidkit-checkpoint 1\n";
  out << "eta " << detail::format_double(m.eta) << "\n";
  out << "couple " << (m.couple_logits ? 1 : 0) << "\n";
  out << "trunk " << detail::dims_string(m.trunk) << "\n";
  out << "family " << detail::dims_string(m.family_branch) << "\n";
  out << "language " << detail::dims_string(m.language_branch) << "\n";
  out << "languages ";
  for (std::size_t l = 0; l < m.taxonomy.n_languages(); ++l) {
    if (l) out << ",";
    out << m.taxonomy.languages[l] << ":"
        << m.taxonomy.families[m.taxonomy.lang_to_family[l]];
  }
  out << "\n";
  out << "encodings ";
  for (std::size_t e = 0; e < m.taxonomy.n_encodings(); ++e) {
    if (e) out << ",";
    out << m.taxonomy.encodings[e];
  }
  out << "\n";
  if (!m.taxonomy.speakers.empty()) {
    out << "speakers ";
    for (std::size_t s = 0; s < m.taxonomy.n_speakers(); ++s) {
      if (s) out << ",";
      out << m.taxonomy.speakers[s];
    }
    out << "\n";
  }
  Vec flat = flatten_params(m);
  out << "params " << flat.size() << "\n";
  for (double v : flat) detail::write_le_double(out, v);
  if (!out) fail_input("write to '", path, "' failed");
}

inline HausModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_input("cannot open checkpoint file '", path, "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "lidkit-checkpoint 1")
    fail_input(path, ": not a lidkit checkpoint (bad magic line)");
  HausModel m;
  std::vector<std::size_t> trunk_dims, family_dims, language_dims;
  bool have_langs = false, have_encs = false;
  long param_total = -1;
  while (std::getline(in, line)) {
    std::string s = detail::trim(line);
    if (s.empty()) continue;
    std::size_t sp = s.find(' ');
    if (sp == std::string::npos)
      fail_input(path, ": malformed manifest line '", s, "'");
    std::string key = s.substr(0, sp);
    std::string rest = detail::trim(s.substr(sp + 1));
    if (key == "eta") {
      try {
        m.eta = std::stod(rest);
      } catch (const std::exception&) {
        fail_input(path, ": bad eta '", rest, "'");
      }
    } else if (key == "couple") {
      m.couple_logits = rest == "1";
    } else if (key == "trunk") {
      trunk_dims = detail::parse_dims(rest, "trunk");
    } else if (key == "family") {
      family_dims = detail::parse_dims(rest, "family");
    } else if (key == "language") {
      language_dims = detail::parse_dims(rest, "language");
    } else if (key == "languages") {
      for (const std::string& pair : detail::split(rest, ',')) {
        std::size_t colon = pair.find(':');
        if (colon == std::string::npos)
          fail_input(path, ": bad language:family pair '", pair, "'");
        std::string lang = pair.substr(0, colon);
        std::string fam = pair.substr(colon + 1);
        std::size_t fi = 0;
        for (; fi < m.taxonomy.families.size(); ++fi)
          if (m.taxonomy.families[fi] == fam) break;
        if (fi == m.taxonomy.families.size())
          m.taxonomy.families.push_back(fam);
        m.taxonomy.languages.push_back(lang);
        m.taxonomy.lang_to_family.push_back(fi);
      }
      have_langs = true;
    } else if (key == "encodings") {
      for (const std::string& e : detail::split(rest, ','))
        m.taxonomy.encodings.push_back(e);
      have_encs = true;
    } else if (key == "speakers") {
      for (const std::string& sp2 : detail::split(rest, ','))
        m.taxonomy.speakers.push_back(sp2);
    } else if (key == "params") {
      try {
        param_total = std::stol(rest);
      } catch (const std::exception&) {
        fail_input(path, ": bad parameter count '", rest, "'");
      }
      break;
    } else {
      fail_input(path, ": unknown manifest key '", key, "'");
    }
  }
  if (!have_langs || !have_encs || param_total < 0 || language_dims.empty())
    fail_input(path, ": incomplete checkpoint manifest");
  validate(m.taxonomy);
  auto build = [](const std::vector<std::size_t>& dims, bool relu_last) {
    Mlp mlp;
    mlp.relu_on_output = relu_last;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      LinearLayer l;
      l.weights = Matrix(dims[i + 1], dims[i]);
      l.bias.assign(dims[i + 1], 0.0);
      mlp.layers.push_back(std::move(l));
    }
    return mlp;
  };
  m.trunk = build(trunk_dims, true);
  m.family_branch = build(family_dims, false);
  m.language_branch = build(language_dims, false);
  if (static_cast<std::size_t>(param_total) != param_count(m))
    fail_input(path, ": manifest declares ", param_total,
               " parameters, dims need ", param_count(m));
  Vec flat(param_total);
  for (double& v : flat) v = detail::read_le_double(in);
  unflatten_params(m, flat);
  validate(m);
  return m;
}

}  // namespace lidkit
