#include "acl/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "acl/binary_io.hpp"
#include "acl/errors.hpp"
#include "acl/losses.hpp"

namespace acl {

std::size_t PredictionSet::rank_of(std::size_t sample, std::size_t cls) const {
  const auto r = ranked(sample);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == cls) return i + 1;
  }
  throw DataError(fmt::format("class {} not in ranking of sample {}", cls, sample));
}

PredictionSet make_prediction_set(Matrix probs, std::vector<int> labels) {
  if (!labels.empty() && labels.size() != probs.rows()) {
    throw DimensionError(
        fmt::format("{} labels for {} prediction rows", labels.size(), probs.rows()));
  }
  PredictionSet out;
  const std::size_t c = probs.cols();
  out.ranking.resize(probs.rows() * c);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    auto rank = std::span<std::uint32_t>(out.ranking.data() + i * c, c);
    std::iota(rank.begin(), rank.end(), 0u);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b]; });
  }
  out.probs = std::move(probs);
  out.labels = std::move(labels);
  return out;
}

PredictionSet predict(const AclModel& model, const Matrix& features,
                      const PredictOptions& options) {
  if (features.cols() != model.dims().feature_dim) {
    throw DimensionError(fmt::format("model expects {} features, got {}",
                                     model.dims().feature_dim, features.cols()));
  }
  const std::size_t c = model.dims().num_classes;
  Matrix probs(features.rows(), c);
  const std::size_t chunk = options.chunk_rows == 0 ? features.rows() : options.chunk_rows;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < features.rows(); start += chunk) {
    const std::size_t stop = std::min(features.rows(), start + chunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix p = classify(model, encode(model, gather_rows(features, idx)));
    std::copy(p.values().begin(), p.values().end(), probs.row(start).begin());
  }
  if (options.mask_weights != nullptr) {
    const auto& active = options.mask_weights->active;
    if (active.size() != c) {
      throw DimensionError(fmt::format("{} class weights for {} classes", active.size(), c));
    }
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      auto row = probs.row(i);
      double kept = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        if (active[k] == 0.0) row[k] = 0.0;
        kept += row[k];
      }
      if (kept > 0.0) {
        for (auto& v : row) v /= kept;
      } else {
        // Every surviving class underflowed; spread mass evenly over them.
        const double survivors = static_cast<double>(options.mask_weights->kept_count());
        for (std::size_t k = 0; k < c; ++k) row[k] = active[k] == 0.0 ? 0.0 : 1.0 / survivors;
      }
    }
  }
  return make_prediction_set(std::move(probs));
}

namespace {
void require_labels(const PredictionSet& pred) {
  if (pred.labels.size() != pred.size()) {
    throw UsageError("metrics need a true label for every prediction");
  }
  if (pred.size() == 0) throw UsageError("metrics need at least one prediction");
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const int y = pred.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= pred.num_classes()) {
      throw DataError(fmt::format("sample {}: label {} outside [0, {})", i, y,
                                  pred.num_classes()));
    }
  }
}
}  // namespace

double accuracy(const PredictionSet& pred) {
  require_labels(pred);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred.top1(i) == static_cast<std::uint32_t>(pred.labels[i])) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

double mean_reciprocal_rank(const PredictionSet& pred) {
  require_labels(pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += 1.0 / static_cast<double>(pred.rank_of(i, static_cast<std::size_t>(pred.labels[i])));
  }
  return sum / static_cast<double>(pred.size());
}

std::string format_predictions_csv(const PredictionSet& pred, std::size_t top_k) {
  if (top_k == 0) throw UsageError("top_k must be >= 1");
  const std::size_t k = std::min(top_k, pred.num_classes());
  if (k < top_k) {
    throw UsageError(fmt::format("top_k {} exceeds the {} classes", top_k, pred.num_classes()));
  }
  std::string out = "sample_index,rank,class_id,probability\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto r = pred.ranked(i);
    for (std::size_t j = 0; j < k; ++j) {
      out += fmt::format("{},{},{},{}\n", i, j + 1, r[j], pred.probs(i, r[j]));
    }
  }
  return out;
}

void export_predictions(const PredictionSet& pred, const std::filesystem::path& path,
                        std::size_t top_k) {
  io::write_file_atomic(path, format_predictions_csv(pred, top_k));
}

std::vector<PredictionRow> parse_predictions_csv(std::string_view text) {
  std::vector<PredictionRow> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 || line.empty()) continue;
    std::string_view cells[4];
    std::size_t n = 0;
    std::size_t start = 0;
    while (n < 4) {
      const std::size_t comma = line.find(',', start);
      cells[n++] = line.substr(start, comma == line.npos ? line.npos : comma - start);
      if (comma == line.npos) break;
      start = comma + 1;
    }
    PredictionRow row;
    auto parse = [&](std::string_view cell, auto& value) {
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw FormatError(fmt::format("prediction csv line {}: bad cell '{}'", line_no, cell));
      }
    };
    if (n != 4 || start == 0 || line.find(',', start) != line.npos) {
      throw FormatError(fmt::format("prediction csv line {}: expected 4 columns", line_no));
    }
    parse(cells[0], row.sample_index);
    parse(cells[1], row.rank);
    parse(cells[2], row.class_id);
    parse(cells[3], row.probability);
    rows.push_back(row);
  }
  return rows;
}

double proxy_distance(double balanced_error) { return 2.0 * (1.0 - 2.0 * balanced_error); }

DomainSeparation domain_separation(std::span<const double> source_scores,
                                   std::span<const double> target_scores,
                                   DomainLabeling labeling) {
  if (source_scores.empty() || target_scores.empty()) {
    throw DataError("domain separation needs samples from both domains");
  }
  const bool source_is_one = labeling == DomainLabeling::source_one;
  std::size_t source_wrong = 0;
  for (double s : source_scores) {
    if ((s > 0.5) != source_is_one) ++source_wrong;
  }
  std::size_t target_wrong = 0;
  for (double s : target_scores) {
    if ((s > 0.5) == source_is_one) ++target_wrong;
  }
  DomainSeparation d;
  d.source_error = static_cast<double>(source_wrong) / static_cast<double>(source_scores.size());
  d.target_error = static_cast<double>(target_wrong) / static_cast<double>(target_scores.size());
  d.balanced_error = 0.5 * (d.source_error + d.target_error);
  d.proxy_distance = proxy_distance(d.balanced_error);
  return d;
}

namespace {

std::vector<double> column(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

double mean_bce(const Matrix& probs, int label) {
  double sum = 0.0;
  for (double p : probs.values()) sum -= label == 1 ? std::log(p) : std::log1p(-p);
  return sum / static_cast<double>(probs.rows());
}

// Logistic regression separating `target` (label 1) from `source` (label 0),
// fitted by full-batch gradient descent on standardized inputs with each
// domain's loss averaged separately. Deterministic: zero init, fixed steps.
struct LinearProbe {
  std::vector<double> mean, inv_std, w;
  double b = 0.0;

  double score(std::span<const double> x) const {
    double a = b;
    for (std::size_t d = 0; d < w.size(); ++d) a += w[d] * (x[d] - mean[d]) * inv_std[d];
    return 1.0 / (1.0 + std::exp(-a));
  }
};

LinearProbe fit_probe(const Matrix& source, std::span<const double> source_w, const Matrix& target,
                      std::size_t iterations, double lr) {
  const std::size_t dim = source.cols();
  LinearProbe p;
  p.mean.assign(dim, 0.0);
  p.inv_std.assign(dim, 1.0);
  p.w.assign(dim, 0.0);
  const double n_all = static_cast<double>(source.rows() + target.rows());
  for (const Matrix* m : {&source, &target}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) p.mean[d] += (*m)(i, d) / n_all;
    }
  }
  std::vector<double> var(dim, 0.0);
  for (const Matrix* m : {&source, &target}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = (*m)(i, d) - p.mean[d];
        var[d] += c * c / n_all;
      }
    }
  }
  for (std::size_t d = 0; d < dim; ++d) p.inv_std[d] = var[d] > 1e-24 ? 1.0 / std::sqrt(var[d]) : 0.0;

  double source_mass = 0.0;
  for (double w : source_w) source_mass += w;
  std::vector<double> grad(dim);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    auto accumulate = [&](const Matrix& m, double label, auto weight_of) {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        const double w = weight_of(i);
        if (w == 0.0) continue;
        auto x = m.row(i);
        const double e = w * (p.score(x) - label);
        for (std::size_t d = 0; d < dim; ++d) grad[d] += e * (x[d] - p.mean[d]) * p.inv_std[d];
        grad_b += e;
      }
    };
    accumulate(source, 0.0, [&](std::size_t i) { return 0.5 * source_w[i] / source_mass; });
    const double inv_t = 0.5 / static_cast<double>(target.rows());
    accumulate(target, 1.0, [&](std::size_t) { return inv_t; });
    for (std::size_t d = 0; d < dim; ++d) p.w[d] -= lr * grad[d];
    p.b -= lr * grad_b;
  }
  return p;
}

std::vector<std::size_t> parity_rows(std::size_t n, std::size_t parity) {
  std::vector<std::size_t> out;
  for (std::size_t i = parity; i < n; i += 2) out.push_back(i);
  return out;
}

}  // namespace

DiagnosticsReport domain_diagnostics(const AclModel& model, const Matrix& source_features,
                                     const Matrix& target_features,
                                     const DiagnosticsOptions& options) {
  if (source_features.rows() < 2 || target_features.rows() < 2) {
    throw DataError("diagnostics need at least two samples per domain");
  }
  const Matrix z_s = encode(model, source_features);
  const Matrix z_t = encode(model, target_features);
  DiagnosticsReport rep;

  const Matrix d1_s = discriminate(model, z_s, DomainLabeling::source_zero);
  const Matrix d1_t = discriminate(model, z_t, DomainLabeling::source_zero);
  const Matrix d2_s = discriminate(model, z_s, DomainLabeling::source_one);
  const Matrix d2_t = discriminate(model, z_t, DomainLabeling::source_one);
  rep.disc1 = domain_separation(column(d1_s), column(d1_t), DomainLabeling::source_zero);
  rep.disc2 = domain_separation(column(d2_s), column(d2_t), DomainLabeling::source_one);
  rep.disc1_source_loss = mean_bce(d1_s, 0);
  rep.disc1_target_loss = mean_bce(d1_t, 1);
  rep.disc2_source_loss = mean_bce(d2_s, 1);
  rep.disc2_target_loss = mean_bce(d2_t, 0);

  std::vector<double> sample_w(z_s.rows(), 1.0);
  if (options.source_class_weights != nullptr) {
    if (options.source_labels.size() != z_s.rows()) {
      throw UsageError("probe class weighting needs a label for every source sample");
    }
    sample_w = per_sample_weights(options.source_class_weights->active, options.source_labels);
  }
  const auto s_train = parity_rows(z_s.rows(), 0);
  const auto s_test = parity_rows(z_s.rows(), 1);
  const auto t_train = parity_rows(z_t.rows(), 0);
  const auto t_test = parity_rows(z_t.rows(), 1);
  std::vector<double> w_train, w_test;
  for (std::size_t i : s_train) w_train.push_back(sample_w[i]);
  for (std::size_t i : s_test) w_test.push_back(sample_w[i]);
  const LinearProbe probe = fit_probe(gather_rows(z_s, s_train), w_train, gather_rows(z_t, t_train),
                                      options.probe_iterations, options.probe_learning_rate);
  std::vector<double> s_scores, t_scores;
  for (std::size_t k = 0; k < s_test.size(); ++k) {
    if (w_test[k] > 0.0) s_scores.push_back(probe.score(z_s.row(s_test[k])));
  }
  for (std::size_t i : t_test) t_scores.push_back(probe.score(z_t.row(i)));
  if (s_scores.empty()) throw DataError("no held-out source samples with positive weight");
  rep.probe = domain_separation(s_scores, t_scores, DomainLabeling::source_zero);
  rep.proxy_distance = rep.probe.proxy_distance;

  auto error_of = [&](const Matrix& features, std::span<const int> labels) {
    PredictionSet pred = predict(model, features);
    pred.labels.assign(labels.begin(), labels.end());
    return 1.0 - accuracy(pred) / 100.0;
  };
  if (options.source_labels.size() == source_features.rows()) {
    rep.source_error = error_of(source_features, options.source_labels);
  }
  if (options.target_labels.size() == target_features.rows()) {
    rep.target_error = error_of(target_features, options.target_labels);
  }
  return rep;
}

std::string format_diagnostics(const DiagnosticsReport& r) {
  std::string out;
  auto line = [&](std::string_view name, const DomainSeparation& d) {
    out += fmt::format("{:<14} balanced_error={:.6f} source_error={:.6f} target_error={:.6f} "
                       "proxy={:.6f}\n",
                       name, d.balanced_error, d.source_error, d.target_error, d.proxy_distance);
  };
  line("disc1", r.disc1);
  line("disc2", r.disc2);
  line("probe", r.probe);
  out += fmt::format("proxy_distance {:.6f}\n", r.proxy_distance);
  out += fmt::format("disc1_loss     source={:.6f} target={:.6f}\n", r.disc1_source_loss,
                     r.disc1_target_loss);
  out += fmt::format("disc2_loss     source={:.6f} target={:.6f}\n", r.disc2_source_loss,
                     r.disc2_target_loss);
  if (r.source_error) out += fmt::format("source_error   {:.6f}\n", *r.source_error);
  if (r.target_error) out += fmt::format("target_error   {:.6f}\n", *r.target_error);
  return out;
}

}  // namespace acl
