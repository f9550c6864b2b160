#include "flowembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace flowembed {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double sq = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

// Remaps arbitrary labels to contiguous ids [0, k).
std::vector<int> compact_labels(const std::vector<int>& labels, size_t* k_out) {
    std::map<int, int> ids;
    for (int l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [l, id] : ids) id = next++;
    std::vector<int> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) out[i] = ids.at(labels[i]);
    if (k_out) *k_out = ids.size();
    return out;
}

// n x m contingency table between two compact labelings.
std::vector<std::vector<size_t>> contingency(const std::vector<int>& a, size_t ka,
                                             const std::vector<int>& b, size_t kb) {
    std::vector<std::vector<size_t>> table(ka, std::vector<size_t>(kb, 0));
    for (size_t i = 0; i < a.size(); ++i) ++table[size_t(a[i])][size_t(b[i])];
    return table;
}

double entropy(const std::vector<size_t>& counts, size_t n) {
    double h = 0.0;
    for (size_t c : counts) {
        if (c == 0) continue;
        double p = double(c) / double(n);
        h -= p * std::log(p);
    }
    return h;
}

// H(A | B) from the contingency table with rows A, columns B.
double conditional_entropy(const std::vector<std::vector<size_t>>& table, size_t n) {
    size_t kb = table.empty() ? 0 : table[0].size();
    double h = 0.0;
    for (size_t j = 0; j < kb; ++j) {
        size_t col = 0;
        for (const auto& row : table) col += row[j];
        if (col == 0) continue;
        for (const auto& row : table) {
            if (row[j] == 0) continue;
            double p_joint = double(row[j]) / double(n);
            h -= p_joint * std::log(double(row[j]) / double(col));
        }
    }
    return h;
}

double pairs2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double silhouette(const std::vector<std::vector<double>>& points,
                  const std::vector<int>& labels) {
    if (points.size() != labels.size())
        throw MetricError("silhouette: point/label count mismatch");
    size_t n = points.size();
    size_t k = 0;
    std::vector<int> ids = compact_labels(labels, &k);
    if (k < 2) throw MetricError("silhouette is undefined for a single cluster");

    std::vector<size_t> cluster_size(k, 0);
    for (int id : ids) ++cluster_size[size_t(id)];

    double total = 0.0;
    std::vector<double> dist_sum(k);
    for (size_t i = 0; i < n; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            dist_sum[size_t(ids[j])] += euclidean(points[i], points[j]);
        }
        size_t own = size_t(ids[i]);
        if (cluster_size[own] == 1) continue;  // singleton scores 0
        double a = dist_sum[own] / double(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < k; ++c) {
            if (c == own || cluster_size[c] == 0) continue;
            b = std::min(b, dist_sum[c] / double(cluster_size[c]));
        }
        double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / double(n);
}

double homogeneity(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size())
        throw MetricError("homogeneity: label list length mismatch");
    if (truth.empty()) throw MetricError("homogeneity: empty input");
    size_t kt = 0, kp = 0;
    std::vector<int> t = compact_labels(truth, &kt);
    std::vector<int> p = compact_labels(predicted, &kp);
    auto table = contingency(t, kt, p, kp);
    size_t n = truth.size();
    std::vector<size_t> t_counts(kt, 0);
    for (int l : t) ++t_counts[size_t(l)];
    double ht = entropy(t_counts, n);
    if (ht == 0.0) return 1.0;
    return 1.0 - conditional_entropy(table, n) / ht;
}

double completeness(const std::vector<int>& truth, const std::vector<int>& predicted) {
    return homogeneity(predicted, truth);
}

double rand_index(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size())
        throw MetricError("rand_index: label list length mismatch");
    size_t n = truth.size();
    if (n < 2) throw MetricError("rand_index needs at least 2 points");
    size_t kt = 0, kp = 0;
    std::vector<int> t = compact_labels(truth, &kt);
    std::vector<int> p = compact_labels(predicted, &kp);
    auto table = contingency(t, kt, p, kp);

    double sum_ij = 0.0;
    std::vector<size_t> rows(kt, 0), cols(kp, 0);
    for (size_t i = 0; i < kt; ++i)
        for (size_t j = 0; j < kp; ++j) {
            sum_ij += pairs2(double(table[i][j]));
            rows[i] += table[i][j];
            cols[j] += table[i][j];
        }
    double sum_rows = 0.0, sum_cols = 0.0;
    for (size_t c : rows) sum_rows += pairs2(double(c));
    for (size_t c : cols) sum_cols += pairs2(double(c));
    double total = pairs2(double(n));
    // agreements = pairs together in both + pairs apart in both
    return (total + 2.0 * sum_ij - sum_rows - sum_cols) / total;
}

double adjusted_rand_index(const std::vector<int>& truth,
                           const std::vector<int>& predicted) {
    if (truth.size() != predicted.size())
        throw MetricError("adjusted_rand_index: label list length mismatch");
    size_t n = truth.size();
    if (n < 2) throw MetricError("adjusted_rand_index needs at least 2 points");
    size_t kt = 0, kp = 0;
    std::vector<int> t = compact_labels(truth, &kt);
    std::vector<int> p = compact_labels(predicted, &kp);
    auto table = contingency(t, kt, p, kp);

    double sum_ij = 0.0;
    std::vector<size_t> rows(kt, 0), cols(kp, 0);
    for (size_t i = 0; i < kt; ++i)
        for (size_t j = 0; j < kp; ++j) {
            sum_ij += pairs2(double(table[i][j]));
            rows[i] += table[i][j];
            cols[j] += table[i][j];
        }
    double sum_rows = 0.0, sum_cols = 0.0;
    for (size_t c : rows) sum_rows += pairs2(double(c));
    for (size_t c : cols) sum_cols += pairs2(double(c));
    double total = pairs2(double(n));
    double expected = sum_rows * sum_cols / total;
    double max_index = (sum_rows + sum_cols) / 2.0;
    if (max_index == expected) return 1.0;  // both labelings trivial
    return (sum_ij - expected) / (max_index - expected);
}

std::pair<double, double> precision_recall(const std::vector<uint8_t>& truth,
                                           const std::vector<double>& scores,
                                           double threshold) {
    if (truth.size() != scores.size())
        throw MetricError("precision_recall: truth/score length mismatch");
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        bool pred = scores[i] >= threshold;
        if (pred && truth[i]) ++tp;
        if (pred && !truth[i]) ++fp;
        if (!pred && truth[i]) ++fn;
    }
    if (tp + fn == 0) throw MetricError("precision_recall: no positives in truth");
    double precision = (tp + fp) == 0 ? 1.0 : double(tp) / double(tp + fp);
    double recall = double(tp) / double(tp + fn);
    return {precision, recall};
}

std::vector<PrPoint> pr_curve(const std::vector<uint8_t>& truth,
                              const std::vector<double>& scores) {
    if (truth.size() != scores.size())
        throw MetricError("pr_curve: truth/score length mismatch");
    size_t n_pos = 0;
    for (uint8_t t : truth) n_pos += t ? 1 : 0;
    if (n_pos == 0) throw MetricError("pr_curve: no positives in truth");

    std::vector<size_t> order(truth.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<PrPoint> curve;
    size_t tp = 0, predicted = 0;
    for (size_t i = 0; i < order.size();) {
        double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            ++predicted;
            if (truth[order[i]]) ++tp;
            ++i;
        }
        curve.push_back({s, double(tp) / double(predicted), double(tp) / double(n_pos)});
    }
    return curve;
}

double pr_auc(const std::vector<uint8_t>& truth, const std::vector<double>& scores) {
    std::vector<PrPoint> curve = pr_curve(truth, scores);
    double auc = 0.0, prev_recall = 0.0;
    for (const auto& pt : curve) {
        auc += (pt.recall - prev_recall) * pt.precision;
        prev_recall = pt.recall;
    }
    return auc;
}

ClassificationReport classification_report(
    const std::vector<int>& truth, const std::vector<int>& predicted,
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::string>& class_names) {
    if (truth.size() != predicted.size() || truth.size() != scores.size())
        throw MetricError("classification_report: input length mismatch");
    if (truth.empty()) throw MetricError("classification_report: empty input");

    std::vector<size_t> truth_counts(class_names.size(), 0);
    for (int t : truth) {
        if (t < 0 || size_t(t) >= class_names.size())
            throw MetricError("classification_report: truth label out of range");
        ++truth_counts[size_t(t)];
    }

    ClassificationReport report;
    bool first = true;
    for (size_t c = 0; c < class_names.size(); ++c) {
        if (truth_counts[c] == 0) {
            report.skipped.push_back(class_names[c]);
            continue;
        }
        size_t tp = 0, fp = 0, fn = 0;
        std::vector<uint8_t> bin(truth.size());
        std::vector<double> cls_scores(truth.size());
        for (size_t i = 0; i < truth.size(); ++i) {
            bool t = size_t(truth[i]) == c;
            bool p = size_t(predicted[i]) == c;
            if (t && p) ++tp;
            if (!t && p) ++fp;
            if (t && !p) ++fn;
            bin[i] = t ? 1 : 0;
            cls_scores[i] = scores[i][c];
        }
        ClassificationReport::PerClass pc;
        pc.label = class_names[c];
        pc.precision = (tp + fp) == 0 ? 0.0 : double(tp) / double(tp + fp);
        pc.recall = double(tp) / double(tp + fn);
        pc.pr_auc = pr_auc(bin, cls_scores);
        report.per_class.push_back(pc);

        report.macro_precision += pc.precision;
        report.macro_recall += pc.recall;
        report.macro_auc += pc.pr_auc;
        if (first) {
            report.min_precision = pc.precision;
            report.min_recall = pc.recall;
            report.min_auc = pc.pr_auc;
            first = false;
        } else {
            report.min_precision = std::min(report.min_precision, pc.precision);
            report.min_recall = std::min(report.min_recall, pc.recall);
            report.min_auc = std::min(report.min_auc, pc.pr_auc);
        }
    }
    if (report.per_class.size() < 2)
        throw MetricError("classification_report needs at least 2 classes in truth");
    report.macro_precision /= double(report.per_class.size());
    report.macro_recall /= double(report.per_class.size());
    report.macro_auc /= double(report.per_class.size());
    return report;
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& eigvals,
                  std::vector<std::vector<double>>& eigvecs) {
    size_t d = a.size();
    eigvecs.assign(d, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < d; ++i) eigvecs[i][i] = 1.0;

    for (size_t sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (size_t i = 0; i < d; ++i)
            for (size_t j = i + 1; j < d; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-24) break;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t i = 0; i < d; ++i) {
                    double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < d; ++i) {
                    double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (size_t i = 0; i < d; ++i) {
                    double vip = eigvecs[i][p], viq = eigvecs[i][q];
                    eigvecs[i][p] = c * vip - s * viq;
                    eigvecs[i][q] = s * vip + c * viq;
                }
            }
    }
    eigvals.resize(d);
    for (size_t i = 0; i < d; ++i) eigvals[i] = a[i][i];
}

}  // namespace

std::vector<std::array<double, 3>> pca3_projection(
    const std::vector<std::vector<double>>& embeddings) {
    size_t n = embeddings.size();
    if (n < 3) throw MetricError("pca3_projection needs at least 3 points");
    size_t d = embeddings[0].size();

    std::vector<double> mean(d, 0.0);
    for (const auto& row : embeddings)
        for (size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (double& m : mean) m /= double(n);

    std::vector<std::vector<double>> centered(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) centered[i][j] = embeddings[i][j] - mean[j];

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t a = 0; a < d; ++a) {
            if (centered[i][a] == 0.0) continue;
            for (size_t b = a; b < d; ++b) cov[a][b] += centered[i][a] * centered[i][b];
        }
    for (size_t a = 0; a < d; ++a)
        for (size_t b = a; b < d; ++b) {
            cov[a][b] /= double(n - 1);
            cov[b][a] = cov[a][b];
        }

    std::vector<double> eigvals;
    std::vector<std::vector<double>> eigvecs;
    jacobi_eigen(cov, eigvals, eigvecs);

    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return eigvals[a] > eigvals[b]; });

    double max_ev = d ? std::max(0.0, eigvals[order[0]]) : 0.0;
    std::vector<std::array<double, 3>> out(n, {0.0, 0.0, 0.0});
    for (size_t comp = 0; comp < 3 && comp < d; ++comp) {
        size_t e = order[comp];
        if (eigvals[e] <= 1e-12 * std::max(max_ev, 1e-300)) continue;  // below rank
        // Sign convention: largest-magnitude component positive.
        size_t arg = 0;
        for (size_t j = 1; j < d; ++j)
            if (std::fabs(eigvecs[j][e]) > std::fabs(eigvecs[arg][e])) arg = j;
        double sign = eigvecs[arg][e] >= 0.0 ? 1.0 : -1.0;
        for (size_t i = 0; i < n; ++i) {
            double proj = 0.0;
            for (size_t j = 0; j < d; ++j) proj += centered[i][j] * eigvecs[j][e];
            out[i][comp] = sign * proj;
        }
    }
    return out;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, size_t k,
                    uint64_t seed, size_t n_init, size_t max_iter) {
    if (points.empty()) throw MetricError("kmeans: empty input");
    if (k < 1 || k > points.size())
        throw MetricError("kmeans: k must lie in [1, n]");
    size_t n = points.size(), d = points[0].size();

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);

    for (size_t init = 0; init < n_init; ++init) {
        // k-means++ seeding
        std::vector<std::vector<double>> centroids;
        std::uniform_int_distribution<size_t> pick(0, n - 1);
        centroids.push_back(points[pick(rng)]);
        std::vector<double> d2(n);
        while (centroids.size() < k) {
            double total = 0.0;
            for (size_t i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::infinity();
                for (const auto& c : centroids) {
                    double dist = euclidean(points[i], c);
                    m = std::min(m, dist * dist);
                }
                d2[i] = m;
                total += m;
            }
            if (total <= 0.0) {
                centroids.push_back(points[pick(rng)]);
                continue;
            }
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            size_t chosen = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
            centroids.push_back(points[chosen]);
        }

        std::vector<int> assign(n, 0);
        for (size_t iter = 0; iter < max_iter; ++iter) {
            bool changed = false;
            for (size_t i = 0; i < n; ++i) {
                size_t arg = 0;
                double bestd = euclidean(points[i], centroids[0]);
                for (size_t c = 1; c < k; ++c) {
                    double dist = euclidean(points[i], centroids[c]);
                    if (dist < bestd) {
                        bestd = dist;
                        arg = c;
                    }
                }
                if (assign[i] != int(arg)) {
                    assign[i] = int(arg);
                    changed = true;
                }
            }
            std::vector<std::vector<double>> next(k, std::vector<double>(d, 0.0));
            std::vector<size_t> counts(k, 0);
            for (size_t i = 0; i < n; ++i) {
                ++counts[size_t(assign[i])];
                for (size_t j = 0; j < d; ++j) next[size_t(assign[i])][j] += points[i][j];
            }
            for (size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) {
                    // Reseed an empty cluster to the point farthest from its centroid.
                    size_t far = 0;
                    double fd = -1.0;
                    for (size_t i = 0; i < n; ++i) {
                        double dist = euclidean(points[i], centroids[size_t(assign[i])]);
                        if (dist > fd) {
                            fd = dist;
                            far = i;
                        }
                    }
                    next[c] = points[far];
                    changed = true;
                } else {
                    for (size_t j = 0; j < d; ++j) next[c][j] /= double(counts[c]);
                }
            }
            centroids = std::move(next);
            if (!changed && iter > 0) break;
        }

        double inertia = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double dist = euclidean(points[i], centroids[size_t(assign[i])]);
            inertia += dist * dist;
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.assignment = assign;
            best.centroids = centroids;
        }
    }
    return best;
}

}  // namespace flowembed
