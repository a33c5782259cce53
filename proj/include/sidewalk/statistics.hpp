#pragma once

#include <string>
#include <vector>

namespace sidewalk {

// Mid-ranks (1-based) of values; ties share the mean of their positions.
std::vector<double> mid_ranks(const std::vector<double>& values);

struct KruskalWallisResult {
  double h = 0.0;
  int df = 0;
  double p = 1.0;
};

// H with tie correction; p from the chi-squared survival function.
// Throws std::invalid_argument for fewer than two groups or an empty group.
KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct MannWhitneyResult {
  double u = 0.0;  // sum over pairs of [a > b] + 0.5 [a == b]
  double z = 0.0;
  double p = 1.0;  // two-sided, normal approximation with tie and continuity corrections
};

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// min(1, p * m) per value.
std::vector<double> bonferroni(const std::vector<double>& pvalues, int m);
double bonferroni(double p, int m);

// Linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double q);
double median(const std::vector<double>& values);

struct NamedGroup {
  std::string name;
  std::vector<double> values;
};

struct PairwiseComparison {
  std::string a;
  std::string b;
  MannWhitneyResult test;
  double p_adjusted = 1.0;
};

struct GroupComparison {
  std::string metric;
  KruskalWallisResult kruskal;
  std::vector<PairwiseComparison> pairwise;  // all pairs, Bonferroni m = number of pairs
};

GroupComparison compare_groups(const std::string& metric, const std::vector<NamedGroup>& groups);

// "H(2)=427.55, p=..." style summary, one line per pairwise test.
std::string format_report(const GroupComparison& comparison, const std::vector<NamedGroup>& groups);
std::string format_p(double p);

}  // namespace sidewalk
