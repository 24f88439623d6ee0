#include "remp/train_eval.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace remp {

namespace {

bool is_frozen(const std::string& name, const std::vector<std::string>& prefixes) {
    for (const auto& p : prefixes)
        if (name.starts_with(p)) return true;
    return false;
}

double schedule_lr(const TrainConfig& config, std::size_t iteration) {
    const auto k = iteration / config.decay_every;
    return config.lr0 / std::pow(config.decay_factor, static_cast<double>(k));
}

std::string fingerprint(const EpisodeShape& shape, const PropagationConfig& pc,
                        const ObjectiveConfig& oc, std::uint64_t seed, std::size_t n_episodes) {
    std::ostringstream out;
    out << "n_way=" << shape.n_way << ";k_shot=" << shape.k_shot << ";m_query=" << shape.m_query
        << ";layers_eval=" << pc.layers_eval << ";repulsion=" << (pc.repulsion_enabled ? 1 : 0)
        << ";repulsion_constant=" << pc.repulsion_constant
        << ";attention_metric=" << metric_name(pc.metric)
        << ";local_metric=" << metric_name(oc.local_metric)
        << ";raw_prototypes=" << (oc.local_on_raw_prototypes ? 1 : 0)
        << ";seed=" << seed << ";episodes=" << n_episodes;
    return out.str();
}

}  // namespace

OptimizerState make_optimizer_state(const ModelParams& params, const TrainConfig& config) {
    OptimizerState state;
    state.velocity = make_gradient_bag(params);
    state.lr = config.lr0;
    return state;
}

void sgd_step(ModelParams& params, const GradientBag& grads, OptimizerState& state,
              const TrainConfig& config, const std::vector<std::string>& frozen_prefixes) {
    auto param_refs = tensor_refs(params);
    auto grad_refs = tensor_refs(const_cast<GradientBag&>(grads));
    auto vel_refs = tensor_refs(state.velocity);
    if (param_refs.size() != grad_refs.size())
        throw std::invalid_argument("sgd_step: gradient shapes do not match parameters");

    const double lr = schedule_lr(config, state.iteration);
    for (std::size_t t = 0; t < param_refs.size(); ++t) {
        if (param_refs[t].size != grad_refs[t].size)
            throw std::invalid_argument("sgd_step: size mismatch for tensor " + param_refs[t].name);
        if (is_frozen(param_refs[t].name, frozen_prefixes)) continue;
        for (std::size_t i = 0; i < grad_refs[t].size; ++i)
            if (!std::isfinite(grad_refs[t].data[i]))
                throw std::runtime_error("sgd_step: non-finite gradient in tensor " +
                                         param_refs[t].name);
        for (std::size_t i = 0; i < param_refs[t].size; ++i) {
            double& v = vel_refs[t].data[i];
            v = config.momentum * v +
                (grad_refs[t].data[i] + config.weight_decay * param_refs[t].data[i]);
            param_refs[t].data[i] -= lr * v;
        }
    }
    ++state.iteration;
    state.lr = schedule_lr(config, state.iteration);
}

double ci95_from(double stddev, std::size_t n) {
    if (n < 2) return 0.0;
    return 1.96 * stddev / std::sqrt(static_cast<double>(n));
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["n_episodes"] = n_episodes;
    j["mean"] = mean;
    j["stddev"] = stddev;
    j["ci95"] = ci95;
    j["config_fingerprint"] = config_fingerprint;
    j["accuracies"] = accuracies;
    return j.dump();
}

TrainResult train(const Dataset& ds, ModelParams params, const TrainConfig& train_config,
                  const PropagationConfig& prop_config, const ObjectiveConfig& obj_config,
                  std::ostream* log_stream) {
    TrainResult result;
    result.best = params;
    OptimizerState state = make_optimizer_state(params, train_config);
    Rng episode_rng(mix_seed(train_config.seed, 0x45504953ULL));  // episode stream

    std::vector<std::string> frozen;
    if (train_config.arm == ScheduleArm::LocalOnly) frozen.push_back("head.");

    const auto t0 = std::chrono::steady_clock::now();
    bool have_best = false;
    auto maybe_validate = [&](std::size_t iter) {
        if (train_config.val_episodes == 0) return;
        EvalReport report = evaluate(ds, params, train_config.val_episodes, train_config.shape,
                                     prop_config, obj_config,
                                     mix_seed(train_config.seed, 0x56414cULL + iter), 1, Split::Val);
        if (!have_best || report.mean > result.best_val_accuracy) {
            result.best_val_accuracy = report.mean;
            result.best = params;
            have_best = true;
        }
    };
    for (std::size_t iter = 0; iter < train_config.max_iters; ++iter) {
        const std::uint64_t ep_seed = episode_rng.next_u64();
        Rng ep_rng(ep_seed);
        Episode episode;
        LossReport loss;
        GradientBag grads;
        try {
            episode = sample_episode(ds, Split::Train, train_config.shape.n_way,
                                     train_config.shape.k_shot, train_config.shape.m_query, ep_rng);
            std::tie(loss, grads) =
                forward_backward(params, episode, prop_config, obj_config, train_config.alpha,
                                 train_config.arm);
        } catch (const std::exception& e) {
            throw std::runtime_error("training iteration " + std::to_string(iter) +
                                     " (episode seed " + std::to_string(ep_seed) + "): " + e.what());
        }
        sgd_step(params, grads, state, train_config, frozen);

        if (train_config.log_every > 0 &&
            (iter % train_config.log_every == 0 || iter + 1 == train_config.max_iters)) {
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
            LogRecord rec{iter, state.lr, loss.global_loss, loss.local_loss, loss.full_loss,
                          loss.query_accuracy_local, ms};
            result.log.push_back(rec);
            if (log_stream) {
                nlohmann::ordered_json j;
                j["iter"] = rec.iter;
                j["lr"] = rec.lr;
                j["global_loss"] = rec.global_loss;
                j["local_loss"] = rec.local_loss;
                j["full_loss"] = rec.full_loss;
                j["query_acc"] = rec.query_acc;
                j["wallclock_ms"] = rec.wallclock_ms;
                *log_stream << j.dump() << "\n";
            }
        }
        if (train_config.eval_every > 0 && (iter + 1) % train_config.eval_every == 0)
            maybe_validate(iter + 1);
    }
    if (train_config.max_iters > 0 && !have_best) maybe_validate(train_config.max_iters);

    result.last = std::move(params);
    if (!have_best) result.best = result.last;
    return result;
}

EvalReport evaluate(const Dataset& ds, const ModelParams& params, std::size_t n_episodes,
                    const EpisodeShape& shape, const PropagationConfig& prop_config,
                    const ObjectiveConfig& obj_config, std::uint64_t seed, std::size_t threads,
                    Split split) {
    EvalReport report;
    report.n_episodes = n_episodes;
    report.accuracies.assign(n_episodes, 0.0);
    report.config_fingerprint = fingerprint(shape, prop_config, obj_config, seed, n_episodes);

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(mix_seed(seed, i));
            Episode episode =
                sample_episode(ds, split, shape.n_way, shape.k_shot, shape.m_query, rng);
            PredictionDistribution dist = predict(params, episode, prop_config, obj_config);
            report.accuracies[i] = accuracy(dist, episode.query_local);
        }
    };

    if (threads <= 1 || n_episodes < 2) {
        worker(0, n_episodes);
    } else {
        const std::size_t n_threads = std::min(threads, n_episodes);
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_episodes + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker, t * chunk, std::min(n_episodes, (t + 1) * chunk));
        for (auto& th : pool) th.join();
    }

    double sum = 0.0;
    for (double a : report.accuracies) sum += a;
    report.mean = n_episodes > 0 ? sum / static_cast<double>(n_episodes) : 0.0;
    double sq = 0.0;
    for (double a : report.accuracies) sq += (a - report.mean) * (a - report.mean);
    report.stddev = n_episodes > 1 ? std::sqrt(sq / static_cast<double>(n_episodes - 1)) : 0.0;
    report.ci95 = ci95_from(report.stddev, n_episodes);
    return report;
}

std::vector<AblationArmResult> run_ablation(const Dataset& ds, const ModelParams& initial,
                                            const TrainConfig& train_config,
                                            const PropagationConfig& prop_config,
                                            const ObjectiveConfig& obj_config,
                                            const std::vector<std::pair<Metric, Metric>>& metric_pairs,
                                            std::size_t eval_episodes, std::uint64_t eval_seed) {
    std::vector<AblationArmResult> results;
    auto eval_with = [&](const ModelParams& params, const PropagationConfig& pc,
                         const ObjectiveConfig& oc) {
        return evaluate(ds, params, eval_episodes, train_config.shape, pc, oc, eval_seed);
    };
    auto run_schedule = [&](ScheduleArm arm, const ObjectiveConfig& oc, const PropagationConfig& pc,
                            const std::string& name) {
        if (arm == ScheduleArm::Cooperative || arm == ScheduleArm::LocalOnly ||
            arm == ScheduleArm::GlobalOnly) {
            TrainConfig tc = train_config;
            tc.arm = arm;
            TrainResult r = train(ds, initial, tc, pc, oc);
            results.push_back({name, eval_with(r.best, pc, oc)});
        }
    };

    for (const auto& [global_metric, local_metric] : metric_pairs) {
        ObjectiveConfig oc = obj_config;
        oc.global_metric = global_metric;
        oc.local_metric = local_metric;
        PropagationConfig pc = prop_config;
        const std::string tag = "[" + metric_name(global_metric) + "/" + metric_name(local_metric) + "]";

        run_schedule(ScheduleArm::Cooperative, oc, pc, "cooperative" + tag);

        {
            // Global-only pretraining for the first half, local-only finetuning after.
            TrainConfig pre = train_config;
            pre.arm = ScheduleArm::GlobalOnly;
            pre.max_iters = train_config.max_iters / 2;
            TrainResult pretrained = train(ds, initial, pre, pc, oc);
            TrainConfig fine = train_config;
            fine.arm = ScheduleArm::LocalOnly;
            fine.max_iters = train_config.max_iters - pre.max_iters;
            fine.seed = mix_seed(train_config.seed, 0x46494eULL);
            TrainResult finetuned = train(ds, pretrained.last, fine, pc, oc);
            results.push_back({"pretrain_finetune" + tag, eval_with(finetuned.best, pc, oc)});
        }

        run_schedule(ScheduleArm::LocalOnly, oc, pc, "local_only" + tag);
        run_schedule(ScheduleArm::GlobalOnly, oc, pc, "global_only" + tag);
    }

    {
        PropagationConfig pc = prop_config;
        pc.repulsion_enabled = false;
        TrainConfig tc = train_config;
        tc.arm = ScheduleArm::Cooperative;
        TrainResult r = train(ds, initial, tc, pc, obj_config);
        results.push_back({"no_repulsion", eval_with(r.best, pc, obj_config)});
    }
    {
        // Inductive: raw support-mean prototypes, zero propagation layers.
        ObjectiveConfig oc = obj_config;
        oc.local_on_raw_prototypes = true;
        PropagationConfig pc = prop_config;
        pc.layers_train = 0;
        pc.layers_eval = 0;
        TrainConfig tc = train_config;
        tc.arm = ScheduleArm::Cooperative;
        TrainResult r = train(ds, initial, tc, pc, oc);
        results.push_back({"inductive", eval_with(r.best, pc, oc)});
    }
    return results;
}

}  // namespace remp
