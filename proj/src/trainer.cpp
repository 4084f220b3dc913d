#include "rrgs/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "rrgs/io.hpp"
#include "rrgs/rasterizer.hpp"

namespace rrgs {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Groups for the regularizers under KNN grouping: one pseudo-group per
// Gaussian, center first, then its neighbors.
std::vector<RayGroup> knn_pseudo_groups(const KnnGroups& knn) {
    std::vector<RayGroup> groups;
    groups.reserve(knn.neighbors.size());
    for (size_t i = 0; i < knn.neighbors.size(); ++i) {
        RayGroup g;
        g.row = -1;
        g.col = -1;
        g.members.push_back(int(i));
        for (int j : knn.neighbors[i]) g.members.push_back(j);
        g.weights.assign(g.members.size(), 0.0);
        groups.push_back(std::move(g));
    }
    return groups;
}

double timestep_window_normalized(double m, int timesteps) {
    if (timesteps <= 1) return 0.0;
    // Windows above 1 are in timestep units; at or below 1 they are already
    // normalized to the [0,1] time domain.
    return m > 1.0 ? m / double(timesteps - 1) : m;
}

}  // namespace

MotionModel initial_model(const RunConfig& cfg, const Scene& scene) {
    const int n = int(scene.canonical.size());
    Rng rng(cfg.seed ^ 0x5eedf00dull);

    if (cfg.motion_model == MotionModelKind::Table) {
        std::vector<double> keys(scene.spec.timesteps);
        for (int t = 0; t < scene.spec.timesteps; ++t) keys[t] = scene.time_of(t);
        if (scene.spec.timesteps == 1) keys = {0.0};
        DeformationTable table = DeformationTable::zeros(keys, n);
        if (cfg.init_noise > 0.0)
            for (auto& d : table.d_position) d += rng.normal_vec3(cfg.init_noise);
        return table;
    }

    const auto family = cfg.motion_model == MotionModelKind::BasisPolynomial
                            ? BasisTrajectory::Family::Polynomial
                            : BasisTrajectory::Family::Fourier;
    BasisTrajectory basis = BasisTrajectory::from_canonical(family, cfg.basis_order,
                                                            scene.canonical);
    if (cfg.init_noise > 0.0)
        for (int l = 1; l < basis.order; ++l)
            for (int i = 0; i < n; ++i)
                basis.coefficients[basis.entry(l, i)] += rng.normal_vec3(cfg.init_noise);
    return basis;
}

double arap_on_ground_truth(const Scene& scene, GroupingMode grouping, double tau, int knn_k) {
    const int last = scene.spec.timesteps - 1;
    const auto& pos_t = scene.trajectories.front();
    const auto& pos_dt = scene.trajectories[last];

    std::vector<Neighborhood> neighborhoods;
    if (grouping == GroupingMode::Knn) {
        neighborhoods = neighborhoods_from_knn(
            knn_groups(pos_t, std::min(knn_k, int(pos_t.size()) - 1)));
    } else {
        RenderOptions opts;
        const RenderOutput out =
            render(ground_truth_frame(scene, 0), scene.canonical, scene.cameras[0], opts);
        neighborhoods = neighborhoods_from_ray_groups(extract_groups(out, tau));
    }
    return arap_loss(neighborhoods, pos_t, pos_dt).value;
}

TrainOutcome train(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    fs::create_directories(fs::path(cfg.output_dir) / "images");
    write_text_file((fs::path(cfg.output_dir) / "config.json").string(), config_echo_json(cfg));

    const Scene scene = generate_scene(cfg.scene);
    const int T = scene.spec.timesteps;
    const int n = int(scene.canonical.size());
    const LossWeights weights = cfg.effective_weights();
    const double m_norm = timestep_window_normalized(weights.temporal_window, T);

    std::vector<int> train_steps;
    for (int t = 0; t < T; ++t)
        if (!cfg.timestep_held_out(t)) train_steps.push_back(t);

    MotionModel model = initial_model(cfg, scene);
    MotionModel last_finite_model = model;
    ModelGradients velocity = zero_gradients(model);
    Rng rng(cfg.seed);

    std::ofstream losses_csv(fs::path(cfg.output_dir) / "losses.csv");
    losses_csv << "iteration,l1,dssim,mcr,sr,arap,total,mcr_pairs,sr_groups,arap_pairs,groups\n";
    std::ofstream reports_jsonl(fs::path(cfg.output_dir) / "loss_reports.jsonl");

    TrainOutcome outcome;
    RenderOptions ropts;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const int t_idx = train_steps[iter % train_steps.size()];
        const double t = scene.time_of(t_idx);

        FrameState frame_t = evaluate_frame(model, scene.canonical, t, true);
        const RenderOutput out = render(frame_t, scene.canonical, scene.cameras[t_idx], ropts);
        const PhotometricResult photo =
            photometric_loss(out.image, scene.targets[t_idx], weights.lambda_dssim);

        const double t2 = sample_timestep_pair(t, m_norm, 1.0, rng);
        FrameState frame_t2 = evaluate_frame(model, scene.canonical, t2, true);

        std::vector<RayGroup> groups;
        const bool needs_groups = weights.lambda_mcr > 0.0 || weights.lambda_sr > 0.0 ||
                                  weights.lambda_arap > 0.0;
        if (needs_groups) {
            groups = cfg.grouping == GroupingMode::Ray
                         ? extract_groups(out, cfg.tau, cfg.pixel_stride)
                         : knn_pseudo_groups(knn_groups(frame_t.positions,
                                                        std::min(cfg.knn_k, n - 1)));
        }

        RegTerm mcr, sr, arap;
        if (weights.lambda_mcr > 0.0)
            mcr = mcr_loss(groups, frame_t.positions, frame_t2.positions, weights.epsilon,
                           weights.motion_threshold);
        if (weights.lambda_sr > 0.0)
            sr = sr_loss(groups, frame_t.positions, frame_t2.positions, weights.huber_delta);
        if (weights.lambda_arap > 0.0) {
            const auto neighborhoods = cfg.grouping == GroupingMode::Ray
                                           ? neighborhoods_from_ray_groups(groups)
                                           : neighborhoods_from_knn(knn_groups(
                                                 frame_t.positions, std::min(cfg.knn_k, n - 1)));
            arap = arap_loss(neighborhoods, frame_t.positions, frame_t2.positions);
        }

        LossReport report =
            total_objective(photo.l1, photo.dssim, mcr.value, sr.value, arap.value, weights);
        report.mcr_pairs = mcr.qualifying;
        report.sr_groups = sr.qualifying;
        report.arap_pairs = arap.qualifying;
        report.group_count = long(groups.size());
        outcome.last = report;
        outcome.iterations_run = iter + 1;

        losses_csv << iter << ',' << fmt_double(report.l1) << ',' << fmt_double(report.dssim)
                   << ',' << fmt_double(report.mcr) << ',' << fmt_double(report.sr) << ','
                   << fmt_double(report.arap) << ',' << fmt_double(report.total) << ','
                   << report.mcr_pairs << ',' << report.sr_groups << ',' << report.arap_pairs
                   << ',' << report.group_count << '\n';
        json jr;
        jr["iteration"] = iter;
        jr["l1"] = report.l1;
        jr["dssim"] = report.dssim;
        jr["mcr"] = report.mcr;
        jr["sr"] = report.sr;
        jr["arap"] = report.arap;
        jr["total"] = report.total;
        jr["mcr_pairs"] = report.mcr_pairs;
        jr["sr_groups"] = report.sr_groups;
        jr["arap_pairs"] = report.arap_pairs;
        jr["groups"] = report.group_count;
        reports_jsonl << jr.dump() << '\n';

        if (!std::isfinite(report.total)) {
            outcome.diverged = true;
            model = last_finite_model;  // saved state comes from the last finite iteration
            break;
        }
        last_finite_model = model;

        // Backward: photometric through the renderer, regularizers straight
        // onto positions; everything through the motion model.
        const ParamGradients render_grads =
            render_backward(out, frame_t, scene.canonical, scene.cameras[t_idx], photo.d_image);

        FrameGrad grad_t;
        grad_t.d_position.assign(n, Vec3::Zero());
        grad_t.d_scale = render_grads.d_scale;
        grad_t.d_rotation = render_grads.d_rotation;
        grad_t.d_opacity = render_grads.d_opacity;
        FrameGrad grad_t2;
        grad_t2.d_position.assign(n, Vec3::Zero());
        for (int i = 0; i < n; ++i) {
            Vec3 g = render_grads.d_position[i];
            Vec3 g2 = Vec3::Zero();
            if (weights.lambda_mcr > 0.0) {
                g += weights.lambda_mcr * mcr.d_pos_t[i];
                g2 += weights.lambda_mcr * mcr.d_pos_dt[i];
            }
            if (weights.lambda_sr > 0.0) {
                g += weights.lambda_sr * sr.d_pos_t[i];
                g2 += weights.lambda_sr * sr.d_pos_dt[i];
            }
            if (weights.lambda_arap > 0.0) {
                g += weights.lambda_arap * arap.d_pos_t[i];
                g2 += weights.lambda_arap * arap.d_pos_dt[i];
            }
            grad_t.d_position[i] = g;
            grad_t2.d_position[i] = g2;
        }

        ModelGradients grads = frame_backward(model, scene.canonical, frame_t, grad_t);
        grads.accumulate(frame_backward(model, scene.canonical, frame_t2, grad_t2));

        // SGD on position parameters only; attribute offsets stay frozen.
        auto step = [&](std::vector<Vec3>& params) {
            for (size_t p = 0; p < params.size(); ++p) {
                velocity.d_position[p] =
                    cfg.momentum * velocity.d_position[p] - cfg.learning_rate * grads.d_position[p];
                params[p] += velocity.d_position[p];
            }
        };
        if (auto* table = std::get_if<DeformationTable>(&model)) {
            step(table->d_position);
        } else {
            step(std::get<BasisTrajectory>(model).coefficients);
        }
    }

    // Final evaluation.
    std::vector<std::vector<Vec3>> estimated(T);
    double psnr_train = 0.0, psnr_holdout = 0.0, ssim_total = 0.0;
    int train_count = 0, holdout_count = 0;
    RenderOptions eval_opts;
    eval_opts.retain_fragments = false;
    for (int ti = 0; ti < T; ++ti) {
        const FrameState f = evaluate_frame(model, scene.canonical, scene.time_of(ti));
        estimated[ti] = f.positions;
        const Image img = render(f, scene.canonical, scene.cameras[ti], eval_opts).image;
        const double p = psnr(img, scene.targets[ti]);
        ssim_total += ssim(img, scene.targets[ti]);
        if (cfg.timestep_held_out(ti)) {
            psnr_holdout += p;
            ++holdout_count;
        } else {
            psnr_train += p;
            ++train_count;
        }
        if (ti == 0 || ti == T / 2 || ti == T - 1) {
            char name[64];
            std::snprintf(name, sizeof(name), "images/render_t%03d.png", ti);
            write_png((std::filesystem::path(cfg.output_dir) / name).string(), img);
        }
    }
    outcome.psnr_train = train_count > 0 ? psnr_train / train_count : 0.0;
    outcome.psnr_holdout = holdout_count > 0 ? psnr_holdout / holdout_count : 0.0;
    outcome.ssim_mean = ssim_total / T;
    outcome.trajectory = trajectory_error(estimated, scene.trajectories);
    outcome.model = model;

    // Trajectories CSV.
    {
        std::ofstream csv(fs::path(cfg.output_dir) / "trajectories.csv");
        csv << "timestep,gaussian,x,y,z\n";
        for (int ti = 0; ti < T; ++ti)
            for (int i = 0; i < n; ++i)
                csv << ti << ',' << i << ',' << fmt_double(estimated[ti][i].x()) << ','
                    << fmt_double(estimated[ti][i].y()) << ',' << fmt_double(estimated[ti][i].z())
                    << '\n';
    }
    // Final groups at the first timestep.
    {
        const FrameState f = evaluate_frame(model, scene.canonical, 0.0);
        const RenderOutput out = render(f, scene.canonical, scene.cameras[0], ropts);
        const auto groups = extract_groups(out, cfg.tau, cfg.pixel_stride);
        std::ofstream csv(fs::path(cfg.output_dir) / "groups.csv");
        csv << "pixel_row,pixel_col,member_index,weight\n";
        for (const auto& g : groups)
            for (size_t j = 0; j < g.members.size(); ++j)
                csv << g.row << ',' << g.col << ',' << g.members[j] << ','
                    << fmt_double(g.weights[j]) << '\n';
    }

    save_checkpoint((fs::path(cfg.output_dir) / "checkpoint.rrgs").string(), model);

    json metrics;
    metrics["config"] = json::parse(config_echo_json(cfg));
    metrics["diverged"] = outcome.diverged;
    metrics["iterations_run"] = outcome.iterations_run;
    metrics["psnr_train"] = outcome.psnr_train;
    metrics["psnr_holdout"] = outcome.psnr_holdout;
    metrics["ssim"] = outcome.ssim_mean;
    metrics["endpoint_error"] = outcome.trajectory.endpoint_error;
    metrics["direction_variance"] = outcome.trajectory.direction_variance;
    json final_losses;
    final_losses["l1"] = outcome.last.l1;
    final_losses["dssim"] = outcome.last.dssim;
    final_losses["mcr"] = outcome.last.mcr;
    final_losses["sr"] = outcome.last.sr;
    final_losses["arap"] = outcome.last.arap;
    final_losses["total"] = outcome.last.total;
    metrics["final_losses"] = final_losses;
    outcome.metrics_json = metrics.dump(2);
    write_text_file((fs::path(cfg.output_dir) / "metrics.json").string(), outcome.metrics_json);
    return outcome;
}

}  // namespace rrgs
