#pragma once

#include "wmforge/image.hpp"
#include "wmforge/ndgrad.hpp"
#include "wmforge/rng.hpp"
#include "wmforge/spectra.hpp"
#include "wmforge/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace wmforge {

enum class LossKind { Ranking, Bce, Hinge };

LossKind loss_kind_from(const std::string& name);
std::string to_string(LossKind k);

// Fully convolutional score net: stride-4 stem, D blocks of
// [depthwise 7x7 -> channel layernorm -> affine -> pointwise x4 -> SiLU
//  -> pointwise] with additive skip, global mean pool, affine head.
struct PrefModel {
    int width = 32;
    int depth = 4;
    std::vector<std::string> names;
    std::vector<Tensor> params;

    int find(const std::string& name) const;
};

PrefModel init_model(int width, int depth, std::uint64_t seed);

// Builds the score subgraph on top of existing parameter leaves.
// param_ids must follow PrefModel::names order.
int build_score(nd::Graph& g, const PrefModel& m, const std::vector<int>& param_ids, int x);

// One-off convenience: score a single image (builds a throwaway graph).
float score_image(const PrefModel& m, const Image& x);

// Reusable graph wrapper for repeated scoring / input gradients at one shape.
class ScoreGraph {
public:
    ScoreGraph(const PrefModel& m, int h, int w, bool input_grad);
    float score(const Tensor& chw);           // forward only
    float score_with_grad(const Tensor& chw); // forward + reverse pass
    // d score / d input after score_with_grad
    const Tensor& input_grad() const;
    void refresh_params(const PrefModel& m);

private:
    nd::Graph graph_;
    int input_ = -1;
    int out_ = -1;
    std::vector<int> param_ids_;
};

// numerically stable sigma(s_plus - s_minus)
double bt_probability(double s_plus, double s_minus);
double ranking_loss(double s_plus, double s_minus);
double bce_loss(double s_plus, double s_minus);
double hinge_loss(double s_plus, double s_minus);

struct TrainConfig {
    int steps = 2000;
    int batch = 8;
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int crop = 64;
    int resize = 128;
    int adv_period = 2;
    int adv_steps = 2;
    double adv_lr_lo = 0.03;
    double adv_lr_hi = 0.09;
    LossKind loss = LossKind::Ranking;
    std::uint64_t seed = 0;
    int width = 32;
    int depth = 4;
    int log_every = 100;
};

struct Pair {
    Image pos;
    Image neg;
};

// Shared augmentation and crop on both members; the negative carries the
// synthetic artifact.
Pair make_pair(const Image& source, Rng& rng, int resize, int crop);

// Two inner ascent steps on the score with an infinity-norm normalized
// gradient; eta is drawn once per batch by the caller.
Image adversarial_negative(ScoreGraph& sg, const Image& x, double eta, int steps);

struct TraceRow {
    int step;
    double loss;
    double rank_acc; // fraction of batch pairs ranked correctly
};

struct TrainResult {
    PrefModel model;
    std::vector<TraceRow> trace;
};

using TrainLogger = std::function<void(const TraceRow&)>;

TrainResult train(const std::vector<Image>& dataset, const TrainConfig& cfg,
                  TrainLogger logger = nullptr);

// P(R(x+) > R(x-)) over explicit pairs
double rank_accuracy(const PrefModel& m, const std::vector<Pair>& pairs);

} // namespace wmforge
