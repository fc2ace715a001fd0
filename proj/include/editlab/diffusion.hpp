#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "editlab/image.hpp"
#include "editlab/nncore.hpp"
#include "editlab/poisonset.hpp"
#include "editlab/rng.hpp"

namespace editlab {

// Noising schedule, 1-indexed over timesteps. Index 0 is the convention
// alpha_bar[0] == 1 (no noise); beta[0]/alpha[0] are placeholders.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // running product of alpha
};

// Linear beta interpolation from beta_min to beta_max over T steps.
// Requires T >= 2 and 0 < beta_min < beta_max < 1.
DiffusionSchedule make_schedule(int T, double beta_min, double beta_max);

// [0,1] image space <-> centered [-1,1] tensor space.
Tensor center_image(const Image& img);
Image uncenter_image(const Tensor& t);

// CHW tensor of i.i.d. standard normal draws.
Tensor normal_field(int c, int h, int w, Rng& rng);

// sqrt(abar_t) * center(x0) + sqrt(1 - abar_t) * eps. Returned unclamped in
// centered coordinates so the noise statistics survive; clamping to image
// range would truncate the Gaussian tails.
Tensor q_sample(const Image& x0, int t, const Tensor& eps, const DiffusionSchedule& sched);

struct EntryLoss {
    double loss = 0.0;
    Tensor x_t;         // noised centered input that was fed to the model
    Tensor prediction;  // model output in [0,1] image space
};

// Forward-only loss for one entry: noise its input image at step t with eps,
// run the model conditioned on the un-noised input and the prompt, and take
// the MSE between prediction and the entry's target.
EntryLoss training_loss(const ModelParams& params, const TrainEntry& entry, int t, const Tensor& eps,
                        const DiffusionSchedule& sched);

// Same computation plus a backward pass accumulating weight * dL/dtheta into
// the parameter gradients (no zeroing). Returns the unweighted entry loss.
double training_loss_grad(ModelParams& params, const TrainEntry& entry, int t, const Tensor& eps,
                          const DiffusionSchedule& sched, double weight);

struct BatchItem {
    const TrainEntry* entry = nullptr;
    int t = 1;
    Tensor eps;
};

// Batch objective: mean over Clean/Adv entries plus the mean of
// lambda-weighted losses over Backdoor entries. Empty groups contribute 0.
struct BatchLoss {
    double total = 0.0;
    double clean_mean = 0.0;         // mean over Clean/Adv entries
    double backdoor_mean = 0.0;      // unweighted mean over Backdoor entries
    double backdoor_weighted = 0.0;  // mean of lambda_e * loss_e over Backdoor entries
};

// Forward-only batch objective.
BatchLoss total_batch_loss(const ModelParams& params, const std::vector<BatchItem>& batch,
                           const DiffusionSchedule& sched);

// Zeroes gradients, then accumulates d(total)/dtheta across the batch.
BatchLoss batch_loss_and_grads(ModelParams& params, const std::vector<BatchItem>& batch,
                               const DiffusionSchedule& sched);

// Ancestral sampler with x0-parameterization: from pure noise, repeatedly
// predict the target, form the posterior mean
//   mu_t = sqrt(abar_{t-1}) * beta_t / (1 - abar_t) * x0_hat
//        + sqrt(alpha_t) * (1 - abar_{t-1}) / (1 - abar_t) * x_t
// and add noise with variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t
// (zero at t == 1). Deterministic given the seed.
Image sample_edit(const ModelParams& params, const Image& input_image, const Prompt& prompt,
                  const DiffusionSchedule& sched, std::uint64_t seed);

struct TrainConfig {
    int total_steps = 3000;
    int batch_size = 16;
    double lr = 2e-3;
    double clip_norm = 1.0;
    std::uint64_t seed = 1;
    std::vector<int> snapshot_marks;  // optimizer steps at which to copy params
};

struct LossRow {
    int step = 0;
    double loss = 0.0;
    double clean_loss = 0.0;     // clean/adv group mean
    double backdoor_loss = 0.0;  // lambda-weighted backdoor group mean
};

struct TrainResult {
    ModelParams params;
    std::vector<LossRow> curve;
    std::vector<std::pair<int, ModelParams>> snapshots;
};

// Seeded minibatch loop: epoch-shuffled order, per-entry uniform t in [1,T]
// and fresh noise, global gradient clipping, Adam.
TrainResult train(const PoisonedDataset& dataset, const Topology& topo, const DiffusionSchedule& sched,
                  const TrainConfig& cfg);

// CSV with header "step,loss,clean_loss,backdoor_loss".
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);
std::vector<LossRow> read_loss_csv(const std::filesystem::path& path);

}  // namespace editlab
