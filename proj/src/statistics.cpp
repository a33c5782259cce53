#include "sidewalk/statistics.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sidewalk {

namespace {

// Sum of t^3 - t over tie groups of a sorted sequence.
double tie_term(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    const double t = static_cast<double>(j - i);
    total += t * t * t - t;
    i = j;
  }
  return total;
}

}  // namespace

std::vector<double> mid_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) {
    throw std::invalid_argument("kruskal_wallis needs at least two groups");
  }
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("kruskal_wallis: empty group");
    for (double v : g) {
      if (!std::isfinite(v)) throw std::invalid_argument("kruskal_wallis: non-finite value");
    }
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  KruskalWallisResult r;
  r.df = static_cast<int>(groups.size()) - 1;
  const double n = static_cast<double>(pooled.size());
  const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
  if (!(correction > 0.0)) {
    return r;  // all values identical
  }
  const std::vector<double> ranks = mid_ranks(pooled);
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
    offset += g.size();
    sum += rank_sum * rank_sum / static_cast<double>(g.size());
  }
  r.h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
  r.h = std::max(r.h, 0.0);
  r.p = boost::math::gamma_q(0.5 * r.df, 0.5 * r.h);
  return r;
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("mann_whitney_u needs two nonempty samples");
  }
  MannWhitneyResult r;
  for (double x : a) {
    for (double y : b) {
      r.u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    }
  }
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term(pooled) / (n * (n - 1.0)));
  if (!(variance > 0.0)) {
    return r;
  }
  const double mu = 0.5 * n1 * n2;
  const double diff = std::max(std::abs(r.u - mu) - 0.5, 0.0);
  r.z = std::copysign(diff / std::sqrt(variance), r.u - mu);
  r.p = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
  return r;
}

double bonferroni(double p, int m) {
  if (!(p >= 0.0 && p <= 1.0) || m < 1) {
    throw std::invalid_argument("bonferroni: p must be in [0, 1] and m >= 1");
  }
  return std::min(1.0, p * m);
}

std::vector<double> bonferroni(const std::vector<double>& pvalues, int m) {
  std::vector<double> out;
  out.reserve(pvalues.size());
  for (double p : pvalues) out.push_back(bonferroni(p, m));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(const std::vector<double>& values) { return quantile(values, 0.5); }

GroupComparison compare_groups(const std::string& metric, const std::vector<NamedGroup>& groups) {
  GroupComparison c;
  c.metric = metric;
  std::vector<std::vector<double>> samples;
  for (const auto& g : groups) samples.push_back(g.values);
  c.kruskal = kruskal_wallis(samples);
  const int m = static_cast<int>(groups.size() * (groups.size() - 1) / 2);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseComparison pc{groups[i].name, groups[j].name,
                            mann_whitney_u(groups[i].values, groups[j].values), 1.0};
      pc.p_adjusted = bonferroni(pc.test.p, m);
      c.pairwise.push_back(pc);
    }
  }
  return c;
}

std::string format_p(double p) {
  char buf[64];
  if (p < 0.001) {
    std::snprintf(buf, sizeof buf, "p<.001 (p=%.3g)", p);
  } else {
    std::snprintf(buf, sizeof buf, "p=%.3f", p);
  }
  return buf;
}

std::string format_report(const GroupComparison& c, const std::vector<NamedGroup>& groups) {
  std::ostringstream out;
  char buf[256];
  out << "metric: " << c.metric << '\n';
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof buf, "  %s: n=%zu median=%.4f IQR=[%.4f, %.4f]\n", g.name.c_str(),
                  g.values.size(), median(g.values), quantile(g.values, 0.25),
                  quantile(g.values, 0.75));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "Kruskal-Wallis: H(%d)=%.2f, %s\n", c.kruskal.df, c.kruskal.h,
                format_p(c.kruskal.p).c_str());
  out << buf;
  out << "Post-hoc Mann-Whitney U, Bonferroni m=" << c.pairwise.size() << ":\n";
  for (const auto& pc : c.pairwise) {
    std::snprintf(buf, sizeof buf, "  %s vs %s: U=%.1f, %s\n", pc.a.c_str(), pc.b.c_str(), pc.test.u,
                  format_p(pc.p_adjusted).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace sidewalk
