#pragma once

// Disentanglement evaluation: MIG, DCI-D, SAP over (latent codes, ground
// truth factors), plus a closed-form Gaussian total-correlation estimate.

#include <did/data.hpp>
#include <did/models.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

struct LatentMatrix {
  std::size_t n = 0, d = 0;
  std::vector<double> z;  // N x d row-major
  double at(std::size_t i, std::size_t j) const { return z[i * d + j]; }
};

struct FactorMatrix {
  std::size_t n = 0, k = 0;
  std::vector<std::uint16_t> v;  // N x K
  std::vector<std::uint32_t> cardinalities;
  std::uint16_t at(std::size_t i, std::size_t j) const { return v[i * k + j]; }
};

struct ImportanceMatrix {
  std::size_t d = 0, k = 0;
  std::vector<double> r;  // d x K, clamped to [0,1]
  double at(std::size_t j, std::size_t f) const { return r[j * k + f]; }
};

struct MetricReport {
  double mig = 0.0, dci_d = 0.0, sap = 0.0, tc = 0.0;
  std::vector<double> mig_per_factor;  // normalized gap per factor (skipped -> NaN)
  ImportanceMatrix importance;
  std::vector<std::string> warnings;
};

// Quantile binning: edge i sits at the i/B empirical quantile; values equal
// to an edge fall in the lower bin. Invariant under strictly monotone
// transforms because edges are order statistics.
inline std::vector<int> discretize(const std::vector<double>& column, int bins) {
  if (bins < 2) throw std::invalid_argument("discretize: need at least 2 bins");
  const std::size_t n = column.size();
  std::vector<double> sorted(column);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  edges.reserve(bins - 1);
  for (int i = 1; i < bins; ++i) {
    std::size_t idx = (i * n) / bins;
    edges.push_back(sorted[idx == 0 ? 0 : idx - 1]);
  }
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    int b = 0;
    for (double e : edges) b += e < column[i];
    out[i] = b;
  }
  return out;
}

// Plug-in mutual information over the joint count table, in nats.
inline double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual_information: length mismatch");
  if (a.empty()) throw std::invalid_argument("mutual_information: empty input");
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  double mi = 0.0;
  for (const auto& [key, c] : pab) {
    const double pj = c / n;
    mi += pj * std::log(pj / ((pa[key.first] / n) * (pb[key.second] / n)));
  }
  return std::max(mi, 0.0);
}

inline double entropy(const std::vector<int>& a) {
  std::map<int, double> counts;
  for (int v : a) counts[v] += 1.0;
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [v, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

// MIG = mean over factors of (top MI - second MI) / H(factor).
inline double mig(const LatentMatrix& Z, const FactorMatrix& V, int bins,
                  std::vector<double>* per_factor = nullptr,
                  std::vector<std::string>* warnings = nullptr) {
  if (Z.d < 2) throw std::invalid_argument("mig: need at least 2 latent dimensions");
  if (Z.n != V.n) throw std::invalid_argument("mig: row count mismatch");
  std::vector<std::vector<int>> zbins(Z.d);
  for (std::size_t j = 0; j < Z.d; ++j) {
    std::vector<double> col(Z.n);
    for (std::size_t i = 0; i < Z.n; ++i) col[i] = Z.at(i, j);
    zbins[j] = discretize(col, bins);
  }
  double total = 0.0;
  std::size_t used = 0;
  if (per_factor) per_factor->assign(V.k, std::nan(""));
  for (std::size_t f = 0; f < V.k; ++f) {
    std::vector<int> vcol(V.n);
    for (std::size_t i = 0; i < V.n; ++i) vcol[i] = V.at(i, f);
    const double h = entropy(vcol);
    if (h <= 0.0) {
      if (warnings)
        warnings->push_back("mig: factor " + std::to_string(f) + " has zero entropy, skipped");
      continue;
    }
    double top = 0.0, second = 0.0;
    for (std::size_t j = 0; j < Z.d; ++j) {
      const double mi = mutual_information(zbins[j], vcol);
      if (mi > top) {
        second = top;
        top = mi;
      } else if (mi > second) {
        second = mi;
      }
    }
    const double gap = (top - second) / h;
    if (per_factor) (*per_factor)[f] = gap;
    total += gap;
    ++used;
  }
  return used > 0 ? total / static_cast<double>(used) : 0.0;
}

namespace detail {

// Held-out accuracy of a per-dimension majority-per-bin classifier, chance
// normalized but not clamped. Train/test on the deterministic even/odd split.
inline double dimension_factor_score(const std::vector<double>& zcol,
                                     const std::vector<std::uint16_t>& vcol,
                                     std::uint32_t cardinality, int bins) {
  const std::size_t n = zcol.size();
  std::vector<double> ztrain;
  std::vector<std::uint16_t> vtrain, vtest;
  std::vector<double> ztest;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 2 == 0) {
      ztrain.push_back(zcol[i]);
      vtrain.push_back(vcol[i]);
    } else {
      ztest.push_back(zcol[i]);
      vtest.push_back(vcol[i]);
    }
  }
  // train-quantile bin edges
  std::vector<double> sorted(ztrain);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int i = 1; i < bins; ++i) {
    std::size_t idx = (i * sorted.size()) / bins;
    edges.push_back(sorted[idx == 0 ? 0 : idx - 1]);
  }
  auto bin_of = [&](double x) {
    int b = 0;
    for (double e : edges) b += e < x;
    return b;
  };
  // per-bin majority class from the training half
  std::vector<std::vector<double>> counts(bins, std::vector<double>(cardinality, 0.0));
  std::vector<double> global(cardinality, 0.0);
  for (std::size_t i = 0; i < ztrain.size(); ++i) {
    counts[bin_of(ztrain[i])][vtrain[i]] += 1.0;
    global[vtrain[i]] += 1.0;
  }
  const auto argmax = [](const std::vector<double>& v) {
    return static_cast<std::uint16_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  const std::uint16_t fallback = argmax(global);
  std::vector<std::uint16_t> predict(bins, fallback);
  for (int b = 0; b < bins; ++b) {
    double total = 0.0;
    for (double c : counts[b]) total += c;
    if (total > 0.0) predict[b] = argmax(counts[b]);
  }
  double correct = 0.0;
  for (std::size_t i = 0; i < ztest.size(); ++i)
    correct += predict[bin_of(ztest[i])] == vtest[i];
  const double acc = ztest.empty() ? 0.0 : correct / static_cast<double>(ztest.size());
  const double chance = 1.0 / static_cast<double>(cardinality);
  return (acc - chance) / (1.0 - chance);
}

// d x K chance-normalized, unclamped scores shared by DCI and SAP.
inline std::vector<double> score_matrix(const LatentMatrix& Z, const FactorMatrix& V, int bins) {
  if (Z.n != V.n) throw std::invalid_argument("score_matrix: row count mismatch");
  if (Z.n < 2 * static_cast<std::size_t>(bins))
    throw std::invalid_argument("score_matrix: need at least 2*bins samples");
  std::vector<double> s(Z.d * V.k, 0.0);
  for (std::size_t j = 0; j < Z.d; ++j) {
    std::vector<double> zcol(Z.n);
    for (std::size_t i = 0; i < Z.n; ++i) zcol[i] = Z.at(i, j);
    for (std::size_t f = 0; f < V.k; ++f) {
      if (V.cardinalities[f] <= 1) continue;  // column of zeros
      std::vector<std::uint16_t> vcol(V.n);
      for (std::size_t i = 0; i < V.n; ++i) vcol[i] = V.at(i, f);
      s[j * V.k + f] = dimension_factor_score(zcol, vcol, V.cardinalities[f], bins);
    }
  }
  return s;
}

}  // namespace detail

inline ImportanceMatrix importance_matrix(const LatentMatrix& Z, const FactorMatrix& V, int bins) {
  ImportanceMatrix R;
  R.d = Z.d;
  R.k = V.k;
  R.r = detail::score_matrix(Z, V, bins);
  for (auto& v : R.r) v = std::clamp(v, 0.0, 1.0);
  return R;
}

// DCI disentanglement: one minus the entropy of each dimension's normalized
// importance profile, weighted by the dimension's share of total importance.
inline double dci_disentanglement(const ImportanceMatrix& R,
                                  std::vector<std::string>* warnings = nullptr) {
  for (double v : R.r)
    if (v < 0.0) throw std::invalid_argument("dci_disentanglement: negative importance");
  const double logk = std::log(static_cast<double>(R.k));
  double grand = 0.0;
  for (double v : R.r) grand += v;
  if (grand <= 0.0) {
    if (warnings) warnings->push_back("dci: all-zero importance matrix");
    return 0.0;
  }
  double score = 0.0;
  for (std::size_t j = 0; j < R.d; ++j) {
    double rowsum = 0.0;
    for (std::size_t f = 0; f < R.k; ++f) rowsum += R.at(j, f);
    if (rowsum <= 0.0) continue;  // D_j = 0 with weight 0
    double h = 0.0;
    for (std::size_t f = 0; f < R.k; ++f) {
      const double p = R.at(j, f) / rowsum;
      if (p > 0.0) h -= p * std::log(p);
    }
    const double dj = R.k > 1 ? 1.0 - h / logk : 1.0;
    score += (rowsum / grand) * dj;
  }
  return score;
}

// SAP: mean over factors of the gap between the best and second-best
// per-dimension held-out prediction scores.
inline double sap(const LatentMatrix& Z, const FactorMatrix& V, int bins) {
  if (Z.d < 2) throw std::invalid_argument("sap: need at least 2 latent dimensions");
  const auto s = detail::score_matrix(Z, V, bins);
  double total = 0.0;
  for (std::size_t f = 0; f < V.k; ++f) {
    double top = -1e300, second = -1e300;
    for (std::size_t j = 0; j < Z.d; ++j) {
      const double v = s[j * V.k + f];
      if (v > top) {
        second = top;
        top = v;
      } else if (v > second) {
        second = v;
      }
    }
    total += top - second;
  }
  return total / static_cast<double>(V.k);
}

// TC estimate under a Gaussian fit: -1/2 ln det(Corr(Z) + eps I).
// Zero-variance columns are excluded.
inline double total_correlation_gaussian(const LatentMatrix& Z,
                                         std::vector<std::string>* warnings = nullptr) {
  if (Z.n <= Z.d) throw std::invalid_argument("total_correlation_gaussian: need N > d");
  std::vector<std::size_t> cols;
  std::vector<double> mean(Z.d, 0.0), var(Z.d, 0.0);
  for (std::size_t j = 0; j < Z.d; ++j) {
    for (std::size_t i = 0; i < Z.n; ++i) mean[j] += Z.at(i, j);
    mean[j] /= static_cast<double>(Z.n);
    for (std::size_t i = 0; i < Z.n; ++i) {
      const double d = Z.at(i, j) - mean[j];
      var[j] += d * d;
    }
    var[j] /= static_cast<double>(Z.n);
    if (var[j] > 0.0) {
      cols.push_back(j);
    } else if (warnings) {
      warnings->push_back("tc: column " + std::to_string(j) + " has zero variance, excluded");
    }
  }
  const std::size_t d = cols.size();
  if (d < 2) return 0.0;
  Eigen::MatrixXd corr(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < Z.n; ++i)
        cov += (Z.at(i, cols[a]) - mean[cols[a]]) * (Z.at(i, cols[b]) - mean[cols[b]]);
      cov /= static_cast<double>(Z.n);
      const double c = cov / std::sqrt(var[cols[a]] * var[cols[b]]);
      corr(a, b) = c;
      corr(b, a) = c;
    }
  }
  corr.diagonal().array() += 1e-8;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  double logdet = 0.0;
  for (double ev : es.eigenvalues())
    logdet += std::log(std::max(ev, 1e-300));
  return -0.5 * logdet;
}

// Encodes every dataset image through E and runs the full metric suite.
inline MetricReport eval_all(const Mlp& E, const FactorDataset& ds, int bins = 20) {
  const std::size_t n = ds.size();
  LatentMatrix Z;
  Z.n = n;
  Z.d = E.out_dim();
  Z.z = E.forward_raw(all_images_scaled(ds), n);
  FactorMatrix V;
  V.n = n;
  V.k = ds.spec.factors.size();
  V.v = ds.factors;
  for (const auto& f : ds.spec.factors) V.cardinalities.push_back(f.cardinality);

  MetricReport report;
  report.mig = mig(Z, V, bins, &report.mig_per_factor, &report.warnings);
  report.importance = importance_matrix(Z, V, bins);
  report.dci_d = dci_disentanglement(report.importance, &report.warnings);
  report.sap = sap(Z, V, bins);
  report.tc = total_correlation_gaussian(Z, &report.warnings);
  return report;
}

}  // namespace did
