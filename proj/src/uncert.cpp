#include "gjam/uncert.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>

#include <omp.h>

#include "gjam/error.hpp"
#include "gjam/rng.hpp"

namespace gjam {

void EnsemblePrediction::validate() const {
  if (m < 1) throw Error(ErrorCode::EmptyEnsemble, "ensemble has no members");
  if (c < 1 || probs.size() != static_cast<std::size_t>(m) * c)
    throw Error(ErrorCode::InvalidSpec, "probability matrix shape does not match M x C");
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) {
      const double v = p(i, k);
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidSpec, "probability outside [0, 1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSpec, "probability row does not sum to 1");
  }
}

double UncertaintyReport::aleatoric_trace() const {
  double s = 0.0;
  for (double v : per_class_aleatoric) s += v;
  return s;
}

double UncertaintyReport::epistemic_trace() const {
  double s = 0.0;
  for (double v : per_class_epistemic) s += v;
  return s;
}

UncertaintyReport decompose(const EnsemblePrediction& ens) {
  ens.validate();
  const int m = ens.m;
  const int c = ens.c;
  const std::size_t cc = static_cast<std::size_t>(c) * c;
  UncertaintyReport r;
  r.c = c;
  r.mean_probs.assign(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < c; ++k) r.mean_probs[static_cast<std::size_t>(k)] += ens.p(i, k);
  for (double& v : r.mean_probs) v /= m;

  r.aleatoric.assign(cc, 0.0);
  r.epistemic.assign(cc, 0.0);
  for (int i = 0; i < m; ++i)
    for (int a = 0; a < c; ++a) {
      const double pa = ens.p(i, a);
      const double da = pa - r.mean_probs[static_cast<std::size_t>(a)];
      for (int b = 0; b < c; ++b) {
        const double pb = ens.p(i, b);
        const double db = pb - r.mean_probs[static_cast<std::size_t>(b)];
        r.aleatoric[static_cast<std::size_t>(a) * c + b] += (a == b ? pa : 0.0) - pa * pb;
        r.epistemic[static_cast<std::size_t>(a) * c + b] += da * db;
      }
    }
  for (std::size_t i = 0; i < cc; ++i) {
    r.aleatoric[i] /= m;
    r.epistemic[i] /= m;
  }
  for (int k = 0; k < c; ++k) {
    r.per_class_aleatoric.push_back(r.aleatoric[static_cast<std::size_t>(k) * c + k]);
    r.per_class_epistemic.push_back(r.epistemic[static_cast<std::size_t>(k) * c + k]);
  }
  return r;
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::uint64_t member_seed(std::uint64_t base_seed, int k) { return derive_seed(base_seed, static_cast<std::uint64_t>(k)); }

std::vector<nnet::Network> train_ensemble(const nnet::LabeledSet& data, const std::vector<nnet::TaskHead>& heads,
                                          const nnet::TrainConfig& cfg, int m, std::uint64_t base_seed,
                                          const nnet::Architecture& arch, int threads,
                                          std::vector<std::vector<nnet::EpochStats>>* traces) {
  if (m < 1) throw Error(ErrorCode::EmptyEnsemble, "ensemble size must be >= 1");
  std::vector<nnet::Network> members(static_cast<std::size_t>(m));
  std::vector<std::vector<nnet::EpochStats>> tr(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nthreads)
  for (int k = 0; k < m; ++k) {
    try {
      nnet::TrainResult res = nnet::train(data, heads, cfg, member_seed(base_seed, k), arch);
      members[static_cast<std::size_t>(k)] = std::move(res.net);
      tr[static_cast<std::size_t>(k)] = std::move(res.trace);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  if (traces != nullptr) *traces = std::move(tr);
  return members;
}

EnsembleOutput ensemble_predict(const std::vector<nnet::Network>& members, std::span<const Spectrogram* const> grids,
                                const std::vector<std::uint64_t>& member_seeds, int threads) {
  if (members.empty()) throw Error(ErrorCode::EmptyEnsemble, "ensemble has no members");
  const int m = static_cast<int>(members.size());
  const int n = static_cast<int>(grids.size());
  std::vector<nnet::Prediction> preds(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) preds[static_cast<std::size_t>(k)] = nnet::predict(members[static_cast<std::size_t>(k)], grids, threads);

  EnsembleOutput out;
  out.n = n;
  const auto& heads = members.front().heads();
  for (std::size_t h = 0; h < heads.size(); ++h) {
    EnsembleOutput::Head eh;
    eh.id = heads[h].desc.id;
    eh.kind = heads[h].desc.kind;
    eh.c = heads[h].desc.n_c;
    const int c = eh.c;
    if (eh.kind == nnet::HeadKind::Classification) {
      eh.mean_probs.assign(static_cast<std::size_t>(n) * c, 0.0);
      for (int i = 0; i < n; ++i) {
        EnsemblePrediction ep;
        ep.m = m;
        ep.c = c;
        ep.member_seeds = member_seeds;
        for (int k = 0; k < m; ++k) {
          const double* row = preds[static_cast<std::size_t>(k)].heads[h].data() + static_cast<std::size_t>(i) * c;
          ep.probs.insert(ep.probs.end(), row, row + c);
          for (int j = 0; j < c; ++j) eh.mean_probs[static_cast<std::size_t>(i) * c + j] += row[j];
        }
        for (int j = 0; j < c; ++j) eh.mean_probs[static_cast<std::size_t>(i) * c + j] /= m;
        eh.labels.push_back(
            argmax_lowest({eh.mean_probs.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)}));
        eh.samples.push_back(std::move(ep));
      }
    } else {
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < m; ++k) s += preds[static_cast<std::size_t>(k)].heads[h][static_cast<std::size_t>(i)];
        const double mean = s / m;
        double ss = 0.0;
        for (int k = 0; k < m; ++k) {
          const double d = preds[static_cast<std::size_t>(k)].heads[h][static_cast<std::size_t>(i)] - mean;
          ss += d * d;
        }
        eh.values.push_back(mean);
        eh.spread.push_back(std::sqrt(ss / m));
      }
    }
    out.heads.push_back(std::move(eh));
  }
  return out;
}

std::vector<double> confusion_uncertainty(const std::vector<int>& truths, const std::vector<int>& preds,
                                          const std::vector<double>& value, int c) {
  if (truths.size() != preds.size() || truths.size() != value.size())
    throw Error(ErrorCode::LengthMismatch, "confusion_uncertainty inputs differ in length");
  std::vector<double> sum(static_cast<std::size_t>(c) * c, 0.0);
  std::vector<int> cnt(sum.size(), 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const std::size_t cell = static_cast<std::size_t>(truths[i]) * c + preds[i];
    sum.at(cell) += value[i];
    ++cnt.at(cell);
  }
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (cnt[i] > 0) sum[i] /= cnt[i];
  return sum;
}

void write_uncertainty_csv(const std::filesystem::path& path, const std::vector<int>& truths,
                           const std::vector<int>& preds, const std::vector<UncertaintyReport>& reports) {
  if (truths.size() != preds.size() || truths.size() != reports.size())
    throw Error(ErrorCode::LengthMismatch, "uncertainty CSV inputs differ in length");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
  const int c = reports.empty() ? 0 : reports.front().c;
  out << "sample,true,pred,aleatoric_trace,epistemic_trace";
  for (int k = 0; k < c; ++k) out << ",aleatoric_" << k;
  for (int k = 0; k < c; ++k) out << ",epistemic_" << k;
  out << "\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const UncertaintyReport& r = reports[i];
    out << i << ',' << truths[i] << ',' << preds[i] << ',' << num(r.aleatoric_trace()) << ','
        << num(r.epistemic_trace());
    for (double v : r.per_class_aleatoric) out << ',' << num(v);
    for (double v : r.per_class_epistemic) out << ',' << num(v);
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::DiskFull, "write failed: " + path.string());
}

}  // namespace gjam
