// Copyright 2026 The symse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "symse/interp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "symse/errors.hpp"

namespace symse::interp {

namespace fs = std::filesystem;

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(ch);
    }
  }
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  f << std::setprecision(10);
  return f;
}

void close_out(std::ofstream& f, const fs::path& p) {
  f.close();
  if (!f) throw IoError("write failed for " + p.string());
}

std::string gray(double v) {
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(v, 0.0, 1.0))));
  std::ostringstream s;
  s << "rgb(" << g << ',' << g << ',' << g << ')';
  return s.str();
}

}  // namespace

std::string file_stem(const std::string& name) {
  std::string out;
  for (char ch : name) out.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_');
  return out.empty() ? "_" : out;
}

std::vector<PhonemeHistogram> token_histograms(const std::vector<std::vector<std::int32_t>>& tokens,
                                               const std::vector<std::vector<std::int32_t>>& classes,
                                               std::size_t book_size, const std::vector<std::string>& class_names,
                                               const std::vector<std::string>& utterance_ids) {
  SYMSE_REQUIRE(book_size >= 1, "token_histograms: book size must be positive");
  if (tokens.size() != classes.size())
    throw DataError("token_histograms: " + std::to_string(tokens.size()) + " token sequences for " +
                    std::to_string(classes.size()) + " label sequences");
  std::map<std::int32_t, PhonemeHistogram> by_class;
  for (std::size_t u = 0; u < tokens.size(); ++u) {
    if (tokens[u].size() != classes[u].size()) {
      const std::string name = u < utterance_ids.size() ? utterance_ids[u] : "#" + std::to_string(u);
      throw DataError("token_histograms: utterance " + name + " has " + std::to_string(tokens[u].size()) +
                      " tokens but " + std::to_string(classes[u].size()) + " frame labels");
    }
    for (std::size_t t = 0; t < tokens[u].size(); ++t) {
      const auto k = tokens[u][t];
      SYMSE_REQUIRE(k >= 0 && static_cast<std::size_t>(k) < book_size, "token_histograms: token out of range");
      auto& h = by_class[classes[u][t]];
      if (h.counts.empty()) {
        h.class_id = classes[u][t];
        const auto c = static_cast<std::size_t>(h.class_id);
        h.name = c < class_names.size() ? class_names[c] : "class" + std::to_string(h.class_id);
        h.counts.assign(book_size, 0);
      }
      ++h.counts[static_cast<std::size_t>(k)];
      ++h.total;
    }
  }
  std::vector<PhonemeHistogram> out;
  for (auto& [id, h] : by_class) {
    h.pdf.resize(book_size);
    for (std::size_t j = 0; j < book_size; ++j)
      h.pdf[j] = static_cast<double>(h.counts[j]) / static_cast<double>(h.total);
    out.push_back(std::move(h));
  }
  return out;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  SYMSE_REQUIRE(p.size() == q.size(), "js_divergence: bin counts differ");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) d += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) d += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(d, 0.0, 1.0);
}

JsMatrix js_matrix(const std::vector<PhonemeHistogram>& histograms) {
  SYMSE_REQUIRE(histograms.size() >= 2, "js_matrix: at least two classes are required");
  JsMatrix m;
  const std::size_t n = histograms.size();
  for (const auto& h : histograms) m.names.push_back(h.name);
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = js_divergence(histograms[i].pdf, histograms[j].pdf);
      m.values[i * n + j] = v;
      m.values[j * n + i] = v;
    }
  }
  return m;
}

void emit_plots(const std::vector<PhonemeHistogram>& histograms, const JsMatrix& matrix, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  for (const auto& h : histograms) {
    const auto stem = file_stem(h.name);
    const auto csv_path = out_dir / ("hist_" + stem + ".csv");
    auto csv = open_out(csv_path);
    csv << "token,count,pdf\n";
    for (std::size_t j = 0; j < h.counts.size(); ++j) csv << j << ',' << h.counts[j] << ',' << h.pdf[j] << '\n';
    close_out(csv, csv_path);

    const std::size_t m = h.pdf.size();
    const double bar = std::max(2.0, 600.0 / static_cast<double>(m));
    const double width = bar * static_cast<double>(m) + 60.0, height = 240.0, plot = 180.0;
    const double peak = std::max(1e-12, *std::max_element(h.pdf.begin(), h.pdf.end()));
    const auto svg_path = out_dir / ("hist_" + stem + ".svg");
    auto svg = open_out(svg_path);
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
        << "<text x=\"30\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(h.name) << " (n="
        << h.total << ")</text>\n";
    for (std::size_t j = 0; j < m; ++j) {
      const double bh = plot * h.pdf[j] / peak;
      svg << "<rect x=\"" << 30.0 + bar * static_cast<double>(j) << "\" y=\"" << 30.0 + plot - bh << "\" width=\""
          << bar * 0.9 << "\" height=\"" << bh << "\" fill=\"black\"/>\n";
    }
    svg << "<line x1=\"30\" y1=\"" << 30.0 + plot << "\" x2=\"" << width - 30.0 << "\" y2=\"" << 30.0 + plot
        << "\" stroke=\"gray\"/>\n"
        << "<text x=\"30\" y=\"" << height - 8.0 << "\" font-family=\"sans-serif\" font-size=\"11\">token index 0.."
        << m - 1 << "</text>\n"
        << "</svg>\n";
    close_out(svg, svg_path);
  }

  const std::size_t n = matrix.size();
  const auto csv_path = out_dir / "jsd_matrix.csv";
  auto csv = open_out(csv_path);
  csv << "phoneme";
  for (const auto& name : matrix.names) csv << ',' << name;
  csv << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    csv << matrix.names[i];
    for (std::size_t j = 0; j < n; ++j) csv << ',' << matrix.at(i, j);
    csv << '\n';
  }
  close_out(csv, csv_path);

  const double cell = 18.0, margin = 60.0;
  const double side = margin + cell * static_cast<double>(n) + 10.0;
  const auto svg_path = out_dir / "jsd_heatmap.svg";
  auto svg = open_out(svg_path);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << side << "\" height=\"" << side << "\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = margin + cell * static_cast<double>(i);
    svg << "<text x=\"" << margin - 4.0 << "\" y=\"" << pos + cell * 0.75
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << xml_escape(matrix.names[i])
        << "</text>\n"
        << "<text x=\"" << pos + cell * 0.7 << "\" y=\"" << margin - 4.0
        << "\" font-family=\"sans-serif\" font-size=\"10\" transform=\"rotate(-90 " << pos + cell * 0.7 << ' '
        << margin - 4.0 << ")\">" << xml_escape(matrix.names[i]) << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      svg << "<rect x=\"" << margin + cell * static_cast<double>(j) << "\" y=\"" << pos << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << gray(matrix.at(i, j)) << "\"><title>"
          << xml_escape(matrix.names[i]) << " / " << xml_escape(matrix.names[j]) << ": " << matrix.at(i, j)
          << "</title></rect>\n";
    }
  }
  svg << "</svg>\n";
  close_out(svg, svg_path);
}

}  // namespace symse::interp
