#include "editlab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "editlab/textio.hpp"

namespace editlab {

DiffusionSchedule make_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) throw std::invalid_argument("make_schedule: T must be at least 2");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
        throw std::invalid_argument("make_schedule: require 0 < beta_min < beta_max < 1");
    DiffusionSchedule s;
    s.T = T;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        const double b = beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) / (T - 1);
        s.beta[static_cast<std::size_t>(t)] = b;
        s.alpha[static_cast<std::size_t>(t)] = 1.0 - b;
        s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - b);
    }
    return s;
}

Tensor center_image(const Image& img) {
    Tensor t = image_to_chw(img);
    for (float& v : t.data) v = 2.0f * v - 1.0f;
    return t;
}

Image uncenter_image(const Tensor& t) {
    Tensor half = t;
    for (float& v : half.data) v = 0.5f * (v + 1.0f);
    return chw_to_image(half);  // Image::set clamps to [0,1]
}

Tensor normal_field(int c, int h, int w, Rng& rng) {
    Tensor t = Tensor::zeros({c, h, w});
    for (float& v : t.data) v = static_cast<float>(rng.normal());
    return t;
}

Tensor q_sample(const Image& x0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::invalid_argument("q_sample: t out of range [1, T]");
    Tensor x = center_image(x0);
    if (eps.shape != x.shape) throw std::invalid_argument("q_sample: eps shape mismatch");
    const float sa = static_cast<float>(std::sqrt(sched.alpha_bar[static_cast<std::size_t>(t)]));
    const float sn = static_cast<float>(std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]));
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = sa * x.data[i] + sn * eps.data[i];
    return x;
}

namespace {

double mse_to_target(const Tensor& y, const Image& target) {
    const Tensor tg = image_to_chw(target);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = static_cast<double>(y.data[i]) - static_cast<double>(tg.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(y.data.size());
}

bool is_clean_group(Role r) { return r != Role::Backdoor; }

}  // namespace

EntryLoss training_loss(const ModelParams& params, const TrainEntry& entry, int t, const Tensor& eps,
                        const DiffusionSchedule& sched) {
    EntryLoss out;
    out.x_t = q_sample(entry.input_image, t, eps, sched);
    const Tensor cond = center_image(entry.input_image);
    out.prediction = model_apply(params, out.x_t, t, cond, entry.prompt.tokens);
    out.loss = mse_to_target(out.prediction, entry.target);
    return out;
}

double training_loss_grad(ModelParams& params, const TrainEntry& entry, int t, const Tensor& eps,
                          const DiffusionSchedule& sched, double weight) {
    const Tensor x_t = q_sample(entry.input_image, t, eps, sched);
    const Tensor cond = center_image(entry.input_image);
    ForwardCtx ctx;
    const Tensor y = model_apply(params, x_t, t, cond, entry.prompt.tokens, &ctx);
    const Tensor tg = image_to_chw(entry.target);
    double acc = 0.0;
    Tensor dy = Tensor::zeros(y.shape);
    const float scale = static_cast<float>(weight * 2.0 / static_cast<double>(y.data.size()));
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = static_cast<double>(y.data[i]) - static_cast<double>(tg.data[i]);
        acc += d * d;
        dy.data[i] = scale * static_cast<float>(d);
    }
    model_backward(params, ctx, dy);
    return acc / static_cast<double>(y.data.size());
}

namespace {

// Shared composition: runs per-entry losses through `run`, which either just
// evaluates or also backpropagates with the group weight.
template <typename RunFn>
BatchLoss compose_batch(const std::vector<BatchItem>& batch, RunFn run) {
    std::size_t n_clean = 0, n_bd = 0;
    for (const BatchItem& it : batch) {
        if (!it.entry) throw std::invalid_argument("batch item has no entry");
        (is_clean_group(it.entry->role) ? n_clean : n_bd) += 1;
    }
    double clean_sum = 0.0, bd_sum = 0.0, bd_weighted_sum = 0.0;
    for (const BatchItem& it : batch) {
        const bool clean = is_clean_group(it.entry->role);
        const double group_w = clean ? 1.0 / static_cast<double>(n_clean)
                                     : it.entry->lambda / static_cast<double>(n_bd);
        const double loss = run(it, group_w);
        if (clean) {
            clean_sum += loss;
        } else {
            bd_sum += loss;
            bd_weighted_sum += it.entry->lambda * loss;
        }
    }
    BatchLoss out;
    if (n_clean > 0) out.clean_mean = clean_sum / static_cast<double>(n_clean);
    if (n_bd > 0) {
        out.backdoor_mean = bd_sum / static_cast<double>(n_bd);
        out.backdoor_weighted = bd_weighted_sum / static_cast<double>(n_bd);
    }
    out.total = out.clean_mean + out.backdoor_weighted;
    return out;
}

}  // namespace

BatchLoss total_batch_loss(const ModelParams& params, const std::vector<BatchItem>& batch,
                           const DiffusionSchedule& sched) {
    return compose_batch(batch, [&](const BatchItem& it, double) {
        return training_loss(params, *it.entry, it.t, it.eps, sched).loss;
    });
}

BatchLoss batch_loss_and_grads(ModelParams& params, const std::vector<BatchItem>& batch,
                               const DiffusionSchedule& sched) {
    params.ensure_grads();
    params.zero_grads();
    return compose_batch(batch, [&](const BatchItem& it, double group_w) {
        return training_loss_grad(params, *it.entry, it.t, it.eps, sched, group_w);
    });
}

Image sample_edit(const ModelParams& params, const Image& input_image, const Prompt& prompt,
                  const DiffusionSchedule& sched, std::uint64_t seed) {
    const int h = input_image.height();
    const int w = input_image.width();
    Rng rng(seed);
    Tensor x = normal_field(3, h, w, rng);
    const Tensor cond = center_image(input_image);
    for (int t = sched.T; t >= 1; --t) {
        const Tensor y = model_apply(params, x, t, cond, prompt.tokens);
        // Predicted target, clamped to image range, back to centered coords.
        Tensor x0c = y;
        for (float& v : x0c.data) v = 2.0f * clamp01(v) - 1.0f;
        const double abar = sched.alpha_bar[static_cast<std::size_t>(t)];
        const double abar_prev = sched.alpha_bar[static_cast<std::size_t>(t) - 1];
        const double beta = sched.beta[static_cast<std::size_t>(t)];
        const float c1 = static_cast<float>(std::sqrt(abar_prev) * beta / (1.0 - abar));
        const float c2 = static_cast<float>(std::sqrt(sched.alpha[static_cast<std::size_t>(t)]) * (1.0 - abar_prev) /
                                            (1.0 - abar));
        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = c1 * x0c.data[i] + c2 * x.data[i];
        if (t > 1) {
            const float sigma = static_cast<float>(std::sqrt((1.0 - abar_prev) / (1.0 - abar) * beta));
            for (float& v : x.data) v += sigma * static_cast<float>(rng.normal());
        }
    }
    return uncenter_image(x);
}

TrainResult train(const PoisonedDataset& dataset, const Topology& topo, const DiffusionSchedule& sched,
                  const TrainConfig& cfg) {
    if (dataset.entries.empty()) throw std::invalid_argument("train: dataset is empty");
    if (cfg.total_steps < 1 || cfg.batch_size < 1) throw std::invalid_argument("train: bad step/batch counts");

    TrainResult res;
    res.params = ModelParams::init(topo, derive_seed(cfg.seed, 20));
    AdamState adam = AdamState::init(res.params, cfg.lr);
    Rng order_rng(derive_seed(cfg.seed, 21));
    Rng step_rng(derive_seed(cfg.seed, 22));

    const std::size_t n = dataset.entries.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t pos = n;  // force an initial shuffle
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    const int h = dataset.entries.front().input_image.height();
    const int w = dataset.entries.front().input_image.width();

    res.curve.reserve(static_cast<std::size_t>(cfg.total_steps));
    for (int step = 1; step <= cfg.total_steps; ++step) {
        if (pos + take > n) {
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
            pos = 0;
        }
        std::vector<BatchItem> batch(take);
        for (std::size_t k = 0; k < take; ++k) {
            batch[k].entry = &dataset.entries[order[pos + k]];
            batch[k].t = 1 + static_cast<int>(step_rng.uniform_int(static_cast<std::size_t>(sched.T)));
            batch[k].eps = normal_field(3, h, w, step_rng);
        }
        pos += take;

        const BatchLoss bl = batch_loss_and_grads(res.params, batch, sched);
        // The token table stays at its initialization: instruction-editing
        // fine-tunes keep the text encoder frozen, so any trigger gating must
        // be carved into the shared conditioning projections instead of a
        // dedicated embedding direction.
        res.params.embed.zero_grad();
        clip_grad_norm(res.params, cfg.clip_norm);
        adam_step(res.params, adam);
        res.curve.push_back({step, bl.total, bl.clean_mean, bl.backdoor_weighted});
        if (std::find(cfg.snapshot_marks.begin(), cfg.snapshot_marks.end(), step) != cfg.snapshot_marks.end())
            res.snapshots.emplace_back(step, res.params);
    }
    return res;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("loss csv: cannot open for writing: " + path.string());
    f << "step,loss,clean_loss,backdoor_loss\n";
    for (const LossRow& r : rows)
        f << r.step << ',' << format_double(r.loss) << ',' << format_double(r.clean_loss) << ','
          << format_double(r.backdoor_loss) << '\n';
    if (!f) throw std::runtime_error("loss csv: write failed: " + path.string());
}

std::vector<LossRow> read_loss_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != "step,loss,clean_loss,backdoor_loss")
        throw std::runtime_error("loss csv: bad header in " + path.string());
    std::vector<LossRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = split(lines[i], ',');
        if (cols.size() != 4) throw std::runtime_error("loss csv: bad row in " + path.string());
        LossRow r;
        r.step = static_cast<int>(parse_int(cols[0]));
        r.loss = parse_double(cols[1]);
        r.clean_loss = parse_double(cols[2]);
        r.backdoor_loss = parse_double(cols[3]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace editlab
