#include "scenequal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "scenequal/error.hpp"
#include "scenequal/log.hpp"

namespace scenequal {

namespace {

void check_lengths(std::span<const double> x, std::span<const double> y, const char* name) {
  if (x.size() != y.size()) {
    throw Error(std::string(name) + ": length mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw Error(std::string(name) + ": need at least 2 points");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

bool degenerate(std::span<const double> x, std::span<const double> y, const char* name) {
  if (is_constant(x) || is_constant(y)) {
    log::warn(std::string(name) + ": constant input, correlation undefined; returning 0");
    return true;
  }
  return false;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Number of tied pairs within runs of equal values in a sorted sequence.
template <typename It, typename Eq>
long long tied_pairs(It first, It last, Eq eq) {
  long long total = 0;
  while (first != last) {
    It run = first;
    long long t = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++t;
    }
    total += t * (t - 1) / 2;
    first = run;
  }
  return total;
}

// Sorts v ascending and returns the number of inversions removed.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, "srcc");
  if (degenerate(x, y, "srcc")) return 0.0;
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double plcc(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, "plcc");
  if (degenerate(x, y, "plcc")) return 0.0;
  return pearson(x, y);
}

double krcc(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, "krcc");
  if (degenerate(x, y, "krcc")) return 0.0;
  const std::size_t n = x.size();
  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {x[i], y[i]};
  std::sort(pts.begin(), pts.end());

  const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long n1 = tied_pairs(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first == b.first; });
  const long long n3 = tied_pairs(pts.begin(), pts.end(), [](auto& a, auto& b) { return a == b; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = pts[i].second;
  const long long swaps = merge_count(ys, buf, 0, n);
  const long long n2 = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (denom == 0.0) return 0.0;
  const double numer = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  return std::clamp(numer / denom, -1.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

namespace {

struct ScenePoints {
  std::vector<double> pred, label;
};

std::map<std::string, ScenePoints> group_by_scene(const std::map<SceneKey, double>& predictions,
                                                  const std::map<SceneKey, double>& labels) {
  std::map<std::string, ScenePoints> scenes;
  for (const auto& [key, label] : labels) {
    auto p = predictions.find(key);
    if (p == predictions.end()) continue;
    auto& s = scenes[key.scene];
    s.pred.push_back(p->second);
    s.label.push_back(label);
  }
  if (scenes.empty()) throw Error("predictions and labels share no (scene, method) keys");
  return scenes;
}

}  // namespace

EvalReport scene_wise_report(const std::map<SceneKey, double>& predictions, const std::map<SceneKey, double>& labels) {
  EvalReport report;
  std::vector<double> s, p, k;
  for (const auto& [scene, pts] : group_by_scene(predictions, labels)) {
    if (pts.pred.size() < 2) {
      log::warn("scene " + scene + " has fewer than 2 labeled methods; skipped");
      report.skipped.push_back(scene);
      continue;
    }
    SceneMetrics m{srcc(pts.pred, pts.label), plcc(pts.pred, pts.label), krcc(pts.pred, pts.label),
                   static_cast<int>(pts.pred.size())};
    s.push_back(m.srcc);
    p.push_back(m.plcc);
    k.push_back(m.krcc);
    report.per_scene[scene] = m;
  }
  if (report.per_scene.empty()) throw Error("no scene has at least 2 labeled methods");
  report.srcc = mean_std(s);
  report.plcc = mean_std(p);
  report.krcc = mean_std(k);
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17) << "scene,srcc,plcc,krcc,n\n";
  for (const auto& [scene, m] : per_scene) {
    out << scene << ',' << m.srcc << ',' << m.plcc << ',' << m.krcc << ',' << m.n_methods << '\n';
  }
  return out.str();
}

nlohmann::json EvalReport::aggregate_json() const {
  auto block = [](const MeanStd& v) { return nlohmann::json{{"mean", v.mean}, {"std", v.std}}; };
  return {{"srcc", block(srcc)},
          {"plcc", block(plcc)},
          {"krcc", block(krcc)},
          {"n_scenes", per_scene.size()},
          {"skipped_scenes", skipped}};
}

void PreferenceTable::validate() const {
  const std::size_t n = items.size();
  if (n < 2) throw Error("preference table needs at least 2 items");
  if (wins.size() != n) throw Error("preference table is not square");
  for (std::size_t i = 0; i < n; ++i) {
    if (wins[i].size() != n) throw Error("preference table is not square");
    for (std::size_t j = 0; j < n; ++j) {
      if (!(wins[i][j] >= 0.0) || !std::isfinite(wins[i][j])) throw Error("preference counts must be finite and >= 0");
    }
    if (wins[i][i] != 0.0) throw Error("preference table has a nonzero diagonal for " + items[i]);
  }
}

double bradley_terry_log_likelihood(const PreferenceTable& table, std::span<const double> pi) {
  double ll = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    for (std::size_t j = 0; j < pi.size(); ++j) {
      if (table.wins[i][j] > 0.0) ll += table.wins[i][j] * (std::log(pi[i]) - std::log(pi[i] + pi[j]));
    }
  }
  return ll;
}

namespace {

// Mutually reachable groups of the directed "beat" graph.
std::vector<std::vector<std::size_t>> win_components(const PreferenceTable& table) {
  const std::size_t n = table.items.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack{s};
    reach[s][s] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        if (table.wins[u][v] > 0.0 && !reach[s][v]) {
          reach[s][v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  std::vector<std::vector<std::size_t>> comps;
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    comps.emplace_back();
    for (std::size_t j = i; j < n; ++j) {
      if (!seen[j] && reach[i][j] && reach[j][i]) {
        seen[j] = true;
        comps.back().push_back(j);
      }
    }
  }
  return comps;
}

}  // namespace

BradleyTerryResult bradley_terry(const PreferenceTable& table, int max_iters, double tol) {
  table.validate();
  if (max_iters < 1) throw ConfigError("bradley_terry: max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("bradley_terry: tol must be > 0");
  const std::size_t n = table.items.size();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += table.wins[i][j] + table.wins[j][i];
    if (total == 0.0) throw Error("item " + table.items[i] + " has no comparisons");
  }
  const auto comps = win_components(table);
  if (comps.size() > 1) {
    std::string msg = "comparison graph is not strongly connected; components:";
    for (const auto& c : comps) {
      msg += " {";
      for (std::size_t k = 0; k < c.size(); ++k) msg += (k ? "," : "") + table.items[c[k]];
      msg += "}";
    }
    throw Error(msg);
  }

  std::vector<double> win_total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) win_total[i] += table.wins[i][j];
  }

  BradleyTerryResult out;
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  out.log_likelihood.push_back(bradley_terry_log_likelihood(table, pi));
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double nij = table.wins[i][j] + table.wins[j][i];
        if (j != i && nij > 0.0) denom += nij / (pi[i] + pi[j]);
      }
      next[i] = win_total[i] / denom;
    }
    const double sum = std::accumulate(next.begin(), next.end(), 0.0);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= sum;
      delta = std::max(delta, std::abs(next[i] - pi[i]));
    }
    pi.swap(next);
    out.iterations = it + 1;
    out.log_likelihood.push_back(bradley_terry_log_likelihood(table, pi));
    if (delta < tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) log::warn("bradley_terry did not converge in " + std::to_string(max_iters) + " iterations");
  out.strengths = pi;
  for (std::size_t i = 0; i < n; ++i) out.scores[table.items[i]] = pi[i];
  return out;
}

std::map<std::string, PreferenceTable> parse_comparisons_csv(const std::string& text) {
  struct Counts {
    std::map<std::string, std::size_t> index;
    std::map<std::pair<std::size_t, std::size_t>, double> wins;
  };
  std::map<std::string, Counts> scenes;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (line_no == 1 && cells.size() == 4 && cells[0] == "scene") continue;
    auto bad = [&](const std::string& why) {
      return FormatError("comparisons line " + std::to_string(line_no) + ": " + why);
    };
    if (cells.size() != 4) throw bad("expected 4 fields scene,winner_method,loser_method,count");
    for (const auto& c : cells) {
      if (c.empty()) throw bad("empty field");
    }
    double count = 0.0;
    try {
      std::size_t used = 0;
      count = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw bad("count '" + cells[3] + "' is not a number");
    }
    if (!(count >= 0.0) || !std::isfinite(count)) throw bad("count must be finite and >= 0");
    if (cells[1] == cells[2]) throw bad("winner and loser are the same method");
    auto& s = scenes[cells[0]];
    auto idx = [&](const std::string& m) { return s.index.emplace(m, s.index.size()).first->second; };
    const auto w = idx(cells[1]);
    const auto l = idx(cells[2]);
    s.wins[{w, l}] += count;
  }
  std::map<std::string, PreferenceTable> out;
  for (const auto& [scene, counts] : scenes) {
    // Items in sorted order so scores do not depend on row order.
    PreferenceTable t;
    std::map<std::size_t, std::size_t> remap;
    for (const auto& [name, i] : counts.index) {
      remap[i] = t.items.size();
      t.items.push_back(name);
    }
    t.wins.assign(t.items.size(), std::vector<double>(t.items.size(), 0.0));
    for (const auto& [ij, c] : counts.wins) t.wins[remap[ij.first]][remap[ij.second]] += c;
    out[scene] = std::move(t);
  }
  return out;
}

std::map<std::string, PreferenceTable> read_comparisons_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open comparisons file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_comparisons_csv(buf.str());
}

VarianceAnalysis variance_analysis(const std::map<std::string, std::vector<double>>& clip_scores) {
  if (clip_scores.size() < 2) throw Error("variance analysis needs at least 2 scenes");
  VarianceAnalysis out;
  std::vector<double> means, intras;
  for (const auto& [scene, scores] : clip_scores) {
    if (scores.size() < 2) throw Error("scene " + scene + " needs at least 2 clip scores");
    const auto ms = mean_std(scores);
    out.intra_std[scene] = ms.std;
    intras.push_back(ms.std);
    means.push_back(ms.mean);
  }
  out.inter_std = mean_std(means).std;
  std::sort(intras.begin(), intras.end());
  const std::size_t m = intras.size();
  out.median_intra = m % 2 ? intras[m / 2] : 0.5 * (intras[m / 2 - 1] + intras[m / 2]);
  const auto exceeding =
      std::count_if(intras.begin(), intras.end(), [&](double s) { return s > out.inter_std; });
  out.fraction_exceeding = static_cast<double>(exceeding) / static_cast<double>(m);
  return out;
}

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y, double& intercept) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  intercept = my - slope * mx;
  return slope;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ScatterSummary scatter_summary(const std::map<SceneKey, double>& predictions,
                               const std::map<SceneKey, double>& labels) {
  ScatterSummary out;
  for (const auto& [scene, pts] : group_by_scene(predictions, labels)) {
    if (pts.pred.size() < 2) continue;
    double b = 0.0;
    const double slope = ls_slope(pts.label, pts.pred, b);
    out.slopes[scene] = slope;
    ++out.total;
    if (slope > 0.0) ++out.positive;
  }
  return out;
}

std::string scatter_svg(const std::map<SceneKey, double>& predictions, const std::map<SceneKey, double>& labels,
                        const std::string& title_prefix) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const auto scenes = group_by_scene(predictions, labels);
  const auto summary = scatter_summary(predictions, labels);

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [scene, pts] : scenes) {
    for (double v : pts.label) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : pts.pred) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (x1 <= x0) x0 -= 0.5, x1 += 0.5;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;

  constexpr double W = 640, H = 480, L = 60, R = 150, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(title_prefix) << summary.positive << '/' << summary.total
      << " scenes with positive slope</text>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">label (JOD)</text>\n";
  svg << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">prediction</text>\n";

  std::size_t color = 0;
  double legend_y = T + 10;
  for (const auto& [scene, pts] : scenes) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    svg << "<g data-scene=\"" << xml_escape(scene) << "\">\n";
    for (std::size_t i = 0; i < pts.pred.size(); ++i) {
      svg << "<circle cx=\"" << px(pts.label[i]) << "\" cy=\"" << py(pts.pred[i]) << "\" r=\"3.5\" fill=\"" << c
          << "\"/>\n";
    }
    if (pts.pred.size() >= 2) {
      double b = 0.0;
      const double slope = ls_slope(pts.label, pts.pred, b);
      const auto [lo, hi] = std::minmax_element(pts.label.begin(), pts.label.end());
      svg << "<line x1=\"" << px(*lo) << "\" y1=\"" << py(slope * *lo + b) << "\" x2=\"" << px(*hi) << "\" y2=\""
          << py(slope * *hi + b) << "\" stroke=\"" << c << "\" stroke-width=\"1.5\" data-slope=\""
          << std::setprecision(6) << slope << std::setprecision(2) << "\"/>\n";
    }
    svg << "</g>\n";
    svg << "<text x=\"" << W - R + 10 << "\" y=\"" << legend_y << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
        << c << "\">" << xml_escape(scene) << "</text>\n";
    legend_y += 14;
  }
  svg << "</svg>\n";
  return svg.str();
}

ScatterSummary write_scatter_svg(const std::filesystem::path& out, const std::map<SceneKey, double>& predictions,
                                 const std::map<SceneKey, double>& labels, const std::string& title_prefix) {
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw Error("cannot write plot " + out.string());
  f << scatter_svg(predictions, labels, title_prefix);
  return scatter_summary(predictions, labels);
}

}  // namespace scenequal
