#pragma once

#include "feddct/nn/autograd.hpp"

#include <span>
#include <stdexcept>
#include <vector>

// Natural logarithm throughout.
namespace feddct::losses {

class LossError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PredictionSet {
    std::vector<std::vector<double>> probs; // S distributions
    int label = 0;
};

struct ObjectiveConfig {
    double lambda_cot = 0.5;
};

// -log p[y]. Throws if y is out of range.
double cross_entropy(std::span<const double> p, int y);
// -log softmax(logits)[y] via log-sum-exp.
double cross_entropy_logits(std::span<const double> logits, int y);
// -sum p log p with 0 log 0 = 0. Throws on negative entries.
double shannon_entropy(std::span<const double> p);
// H(mean_k p_k) - mean_k H(p_k). Requires S >= 2 and equal lengths.
double cot_loss(const PredictionSet &preds);
// sum_k CE(p_k, y) + lambda_cot * L_cot.
double cluster_objective(const PredictionSet &preds, const ObjectiveConfig &cfg);

// Throws LossError unless every p is nonnegative and sums to 1 within tol.
void validate(const PredictionSet &preds, double tol = 1e-9);

// Taped batch versions. Logits are [B, C]; every result is a [1] mean over the batch.
nn::Var cross_entropy_batch(nn::Var logits, std::span<const int> labels);
// Needs at least two logit tensors of identical shape.
nn::Var cot_loss_batch(std::span<const nn::Var> logits);

// Records sum_k CE_k, then lambda * L_cot (skipped when S == 1), and returns
// their sum. Recording order matches the split protocol so both produce
// identical gradients.
struct ObjectiveTerms {
    std::vector<nn::Var> ce;
    nn::Var weighted_cot; // invalid when S == 1
    nn::Var total;
};
ObjectiveTerms cluster_objective(std::span<const nn::Var> logits, std::span<const int> labels,
                                 const ObjectiveConfig &cfg);

// lambda * L_cot recorded on its own; what the server evaluates on the
// prediction leaves it receives.
nn::Var weighted_cot_loss(std::span<const nn::Var> logits, double lambda_cot);

} // namespace feddct::losses
