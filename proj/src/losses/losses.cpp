#include "feddct/losses/losses.hpp"

#include "feddct/nn/ops.hpp"

#include <cmath>
#include <string>

namespace feddct::losses {

namespace ops = nn::ops;

namespace {

void check_label(int y, std::size_t classes)
{
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw LossError("label " + std::to_string(y) + " out of range for " + std::to_string(classes) + " classes");
}

void check_shapes(const PredictionSet &preds, std::size_t min_s)
{
    if (preds.probs.size() < min_s)
        throw LossError("need at least " + std::to_string(min_s) + " distributions, got " +
                        std::to_string(preds.probs.size()));
    const std::size_t n = preds.probs.front().size();
    for (std::size_t k = 0; k < preds.probs.size(); ++k)
        if (preds.probs[k].size() != n)
            throw LossError("distribution " + std::to_string(k) + " has length " +
                            std::to_string(preds.probs[k].size()) + ", expected " + std::to_string(n));
}

} // namespace

double cross_entropy(std::span<const double> p, int y)
{
    check_label(y, p.size());
    return -std::log(p[static_cast<std::size_t>(y)]);
}

double cross_entropy_logits(std::span<const double> logits, int y)
{
    check_label(y, logits.size());
    return -ops::log_softmax(logits)[static_cast<std::size_t>(y)];
}

double shannon_entropy(std::span<const double> p)
{
    double h = 0.0;
    for (double v : p) {
        if (v < 0.0)
            throw LossError("negative probability " + std::to_string(v));
        if (v > 0.0)
            h -= v * std::log(v);
    }
    return h;
}

double cot_loss(const PredictionSet &preds)
{
    check_shapes(preds, 2);
    const std::size_t s = preds.probs.size(), n = preds.probs.front().size();
    std::vector<double> mean(n, 0.0);
    double mean_h = 0.0;
    for (const auto &p : preds.probs) {
        for (std::size_t j = 0; j < n; ++j)
            mean[j] += p[j];
        mean_h += shannon_entropy(p);
    }
    for (auto &m : mean)
        m /= static_cast<double>(s);
    return shannon_entropy(mean) - mean_h / static_cast<double>(s);
}

double cluster_objective(const PredictionSet &preds, const ObjectiveConfig &cfg)
{
    if (cfg.lambda_cot < 0.0)
        throw LossError("lambda_cot must be nonnegative");
    check_shapes(preds, 1);
    double f = 0.0;
    for (const auto &p : preds.probs)
        f += cross_entropy(p, preds.label);
    if (preds.probs.size() >= 2)
        f += cfg.lambda_cot * cot_loss(preds);
    return f;
}

void validate(const PredictionSet &preds, double tol)
{
    check_shapes(preds, 1);
    check_label(preds.label, preds.probs.front().size());
    for (std::size_t k = 0; k < preds.probs.size(); ++k) {
        double s = 0.0;
        for (double v : preds.probs[k]) {
            if (v < 0.0)
                throw LossError("distribution " + std::to_string(k) + " has a negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > tol)
            throw LossError("distribution " + std::to_string(k) + " sums to " + std::to_string(s));
    }
}

nn::Var cross_entropy_batch(nn::Var logits, std::span<const int> labels)
{
    const auto &shape = logits.shape();
    if (shape.size() != 2)
        throw LossError("cross_entropy_batch expects [B, C] logits, got " + nn::shape_string(shape));
    for (int y : labels)
        check_label(y, shape[1]);
    return ops::scale(ops::mean_all(ops::pick(ops::log_softmax_rows(logits), labels)), -1.0);
}

nn::Var cot_loss_batch(std::span<const nn::Var> logits)
{
    if (logits.size() < 2)
        throw LossError("co-training loss needs at least two sub-model outputs");
    const double inv_s = 1.0 / static_cast<double>(logits.size());
    std::vector<nn::Var> probs, entropies;
    for (const auto &l : logits) {
        if (l.shape() != logits.front().shape())
            throw LossError("logit shapes differ: " + nn::shape_string(l.shape()) + " vs " +
                            nn::shape_string(logits.front().shape()));
        probs.push_back(ops::softmax_rows(l));
    }
    nn::Var mean = ops::scale(ops::sum_of(probs), inv_s);
    nn::Var h_mean = ops::scale(ops::row_sum(ops::xlogx(mean)), -1.0);
    for (const auto &p : probs)
        entropies.push_back(ops::scale(ops::row_sum(ops::xlogx(p)), -1.0));
    nn::Var mean_h = ops::scale(ops::sum_of(entropies), inv_s);
    return ops::mean_all(ops::sub(h_mean, mean_h));
}

nn::Var weighted_cot_loss(std::span<const nn::Var> logits, double lambda_cot)
{
    if (lambda_cot < 0.0)
        throw LossError("lambda_cot must be nonnegative");
    return ops::scale(cot_loss_batch(logits), lambda_cot);
}

ObjectiveTerms cluster_objective(std::span<const nn::Var> logits, std::span<const int> labels,
                                 const ObjectiveConfig &cfg)
{
    if (logits.empty())
        throw LossError("cluster objective needs at least one sub-model output");
    ObjectiveTerms t;
    for (const auto &l : logits)
        t.ce.push_back(cross_entropy_batch(l, labels));
    std::vector<nn::Var> terms = t.ce;
    if (logits.size() >= 2) {
        t.weighted_cot = weighted_cot_loss(logits, cfg.lambda_cot);
        terms.push_back(t.weighted_cot);
    }
    t.total = ops::sum_of(terms);
    return t;
}

} // namespace feddct::losses
