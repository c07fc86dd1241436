// splidar: simulate, reconstruct and evaluate multi-surface 3D point clouds
// from single-photon lidar photon-count histograms.

#include "splidar/report_json.hpp"
#include "splidar/splidar.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using njson = nlohmann::ordered_json;
using namespace splidar;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
    if (!out) throw FormatError("write failed: " + path);
}

SensorModel load_sensor(const std::string& calib_path, const PhotonCube& cube,
                        int superres_override) {
    SensorModel sensor;
    if (!calib_path.empty()) {
        sensor = read_calibration(calib_path);
        if (sensor.n_rows != cube.n_rows || sensor.n_cols != cube.n_cols ||
            sensor.n_bins != cube.n_bins)
            throw FormatError("calibration dimensions do not match the cube");
    } else {
        double bin_res = cube.bin_width_s > 0.0
                             ? kSpeedOfLight * cube.bin_width_s / 2.0
                             : 1.0;
        sensor = SensorModel(cube.n_rows, cube.n_cols, cube.n_bins, Irf::gaussian(1.5), 1,
                             bin_res, bin_res);
        std::cerr << "note: no calibration file given, assuming Gaussian IRF (sigma 1.5 bins)"
                  << " and pixel pitch " << sensor.pixel_pitch << " m\n";
    }
    if (superres_override > 0 && superres_override != sensor.superres) {
        // keep the physical coarse pixel size, re-split it into s x s cells
        double coarse_pitch = sensor.pixel_pitch * sensor.superres;
        sensor.superres = superres_override;
        sensor.pixel_pitch = coarse_pitch / superres_override;
    }
    return sensor;
}

std::string truth_csv(const PointCloud& truth) {
    std::ostringstream out;
    out << "x,y,z,intensity,i,j,fi,fj,t\n";
    char buf[256];
    for (const Point& p : truth) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%d,%d,%d,%d,%.9g\n",
                      p.position.x(), p.position.y(), p.position.z(), p.intensity, p.i, p.j,
                      p.fi, p.fj, p.t);
        out << buf;
    }
    return out.str();
}

std::vector<int> parse_levels(const std::string& csv) {
    std::vector<int> levels;
    for (double v : KeyValueFile::to_double_list(csv, "levels"))
        levels.push_back(static_cast<int>(v));
    if (levels.empty()) throw CLI::ValidationError("levels", "need at least one level");
    for (int l : levels)
        if (l < 1) throw CLI::ValidationError("levels", "levels must be >= 1");
    return levels;
}

int run(int argc, char** argv) {
    CLI::App app{"single-photon lidar multi-surface reconstruction toolkit"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    // ---- simulate ----
    auto* cmd_sim = app.add_subcommand("simulate", "draw a photon cube from a scene spec");
    std::string sim_scene, sim_out, sim_truth_ply, sim_truth_csv, sim_calib, sim_report;
    std::uint64_t sim_seed = 1;
    cmd_sim->add_option("scene", sim_scene, "scene spec file")->required();
    cmd_sim->add_option("-o,--output", sim_out, "output cube (SPCB)")->required();
    cmd_sim->add_option("--seed", sim_seed, "RNG seed");
    cmd_sim->add_option("--truth-ply", sim_truth_ply, "ground-truth cloud (default <out>.truth.ply)");
    cmd_sim->add_option("--truth-csv", sim_truth_csv, "ground-truth table (default <out>.truth.csv)");
    cmd_sim->add_option("--calib-out", sim_calib, "calibration snapshot (default <out>.calib)");
    cmd_sim->add_option("--report", sim_report, "simulation report JSON");

    // ---- reconstruct ----
    auto* cmd_rec = app.add_subcommand("reconstruct", "PALM plug-and-play reconstruction");
    std::string rec_cube, rec_cfg, rec_out, rec_calib, rec_report, rec_background;
    bool rec_timings = false;
    int rec_superres = 0;
    cmd_rec->add_option("cube", rec_cube, "input cube (SPCB)")->required();
    cmd_rec->add_option("-c,--config", rec_cfg, "reconstruction config (key=value)");
    cmd_rec->add_option("-o,--output", rec_out, "output cloud (PLY)")->required();
    cmd_rec->add_option("--calib", rec_calib, "calibration file");
    cmd_rec->add_option("--report", rec_report, "report JSON");
    cmd_rec->add_option("--background-out", rec_background, "estimated background CSV");
    cmd_rec->add_option("--superres", rec_superres, "override super-resolution factor");
    cmd_rec->add_flag("--timings", rec_timings, "include wall-clock times in the report");

    // ---- baseline ----
    auto* cmd_base = app.add_subcommand("baseline", "cross-correlation baseline (one return per pixel)");
    std::string base_cube, base_out, base_calib;
    cmd_base->add_option("cube", base_cube, "input cube (SPCB)")->required();
    cmd_base->add_option("-o,--output", base_out, "output cloud (PLY)")->required();
    cmd_base->add_option("--calib", base_calib, "calibration file");

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "recall/RMSE of an estimate against ground truth");
    std::string eval_est, eval_truth, eval_report;
    double eval_tau = 0.04, eval_pitch = 0.0;
    cmd_eval->add_option("estimate", eval_est, "estimated cloud (PLY)")->required();
    cmd_eval->add_option("truth", eval_truth, "ground-truth cloud (PLY)")->required();
    cmd_eval->add_option("--tau", eval_tau, "depth tolerance in metres");
    cmd_eval->add_option("--pitch", eval_pitch,
                         "pixel-column pitch in metres (default: from truth PLY comment)");
    cmd_eval->add_option("--report", eval_report, "write metrics JSON here (default stdout)");

    // ---- bench ----
    auto* cmd_bench = app.add_subcommand("bench", "runtime scaling benchmark");
    std::string bench_cube, bench_cfg, bench_calib, bench_out, bench_axis = "active_bins";
    std::string bench_levels = "1,2,4,8";
    int bench_iters = 3, bench_repeats = 3;
    cmd_bench->add_option("cube", bench_cube, "base cube (SPCB)")->required();
    cmd_bench->add_option("--axis", bench_axis, "pixels | active_bins")
        ->check(CLI::IsMember({"pixels", "active_bins"}));
    cmd_bench->add_option("--levels", bench_levels, "comma-separated multipliers");
    cmd_bench->add_option("-c,--config", bench_cfg, "reconstruction config");
    cmd_bench->add_option("--calib", bench_calib, "calibration file");
    cmd_bench->add_option("--iters", bench_iters, "fixed PALM iterations per run");
    cmd_bench->add_option("--repeats", bench_repeats, "timed repeats per level (median)");
    cmd_bench->add_option("-o,--output", bench_out, "CSV output (default stdout)");

    // ---- sweep ----
    auto* cmd_sweep = app.add_subcommand("sweep", "operating-conditions sweep (ppp x SBR grid)");
    std::string sweep_scene, sweep_cfg, sweep_out, sweep_ppp = "3", sweep_sbr = "13";
    int sweep_seeds = 3;
    double sweep_tau = 0.04;
    std::uint64_t sweep_seed0 = 1;
    cmd_sweep->add_option("scene", sweep_scene, "scene spec file")->required();
    cmd_sweep->add_option("--ppp", sweep_ppp, "signal photons/pixel levels (csv)");
    cmd_sweep->add_option("--sbr", sweep_sbr, "SBR levels (csv)");
    cmd_sweep->add_option("--seeds", sweep_seeds, "seeds per cell");
    cmd_sweep->add_option("--seed0", sweep_seed0, "first seed");
    cmd_sweep->add_option("--tau", sweep_tau, "depth tolerance in metres");
    cmd_sweep->add_option("-c,--config", sweep_cfg, "reconstruction config");
    cmd_sweep->add_option("-o,--output", sweep_out, "CSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // argument error
    }
    set_thread_count(threads);

    if (*cmd_sim) {
        SceneSpec scene = SceneSpec::from_file(sim_scene);
        SensorModel sensor = build_sensor(scene);
        auto [cube, sim] = simulate_cube(scene, sensor, sim_seed);
        write_cube(cube, sim_out);
        if (sim_truth_ply.empty()) sim_truth_ply = sim_out + ".truth.ply";
        if (sim_truth_csv.empty()) sim_truth_csv = sim_out + ".truth.csv";
        if (sim_calib.empty()) sim_calib = sim_out + ".calib";
        write_ply(sim.truth, sim_truth_ply, sensor.pixel_pitch);
        write_text(sim_truth_csv, truth_csv(sim.truth));
        write_calibration(sensor, sim_calib);
        njson j{{"seed", sim_seed},
                {"n_rows", cube.n_rows},
                {"n_cols", cube.n_cols},
                {"n_bins", cube.n_bins},
                {"total_photons", cube.total_count},
                {"truth_points", sim.truth.size()},
                {"expected_signal_ppp", sim.expected_signal_ppp},
                {"expected_sbr", sim.expected_sbr},
                {"realized_signal_ppp", sim.realized_signal_ppp},
                {"realized_total_ppp", sim.realized_total_ppp},
                {"realized_sbr", sim.realized_sbr}};
        if (!sim_report.empty()) write_text(sim_report, j.dump(2) + "\n");
        std::cerr << "simulated " << cube.total_count << " photons over " << cube.n_pixels()
                  << " pixels (signal ppp " << sim.realized_signal_ppp << ", SBR "
                  << sim.realized_sbr << ")\n";
        return 0;
    }

    if (*cmd_rec) {
        PhotonCube cube = read_cube(rec_cube);
        SensorModel sensor = load_sensor(rec_calib, cube, rec_superres);
        ReconConfig cfg = rec_cfg.empty() ? ReconConfig{} : ReconConfig::from_file(rec_cfg);
        ReconResult result = reconstruct(cube, sensor, cfg);
        write_ply(result.cloud, rec_out, sensor.pixel_pitch);
        if (!rec_background.empty()) {
            std::ostringstream bg;
            char buf[64];
            for (int i = 0; i < result.background.rows; ++i)
                for (int j = 0; j < result.background.cols; ++j) {
                    std::snprintf(buf, sizeof buf, "%.9g", result.background(i, j));
                    bg << buf << (j + 1 == result.background.cols ? "\n" : ",");
                }
            write_text(rec_background, bg.str());
        }
        if (!rec_report.empty())
            write_text(rec_report, recon_report_json(result.report, rec_timings));
        std::cerr << "reconstructed " << result.cloud.size() << " points in "
                  << result.report.iterations << " iterations ("
                  << result.report.total_seconds << " s)\n";
        return 0;
    }

    if (*cmd_base) {
        PhotonCube cube = read_cube(base_cube);
        SensorModel sensor = load_sensor(base_calib, cube, 0);
        PointCloud cloud = baseline_xcorr(cube, sensor);
        write_ply(cloud, base_out, sensor.pixel_pitch * sensor.superres);
        std::cerr << "baseline found " << cloud.size() << " points\n";
        return 0;
    }

    if (*cmd_eval) {
        PlyCloud est = read_ply(eval_est);
        PlyCloud truth = read_ply(eval_truth);
        double pitch = eval_pitch;
        if (pitch <= 0.0) {
            if (!truth.pixel_pitch)
                throw CLI::ValidationError(
                    "--pitch", "truth PLY carries no pixel_pitch comment; pass --pitch");
            pitch = *truth.pixel_pitch;
        }
        EvalResult result = evaluate(est.cloud, truth.cloud, eval_tau, pitch);
        std::string text = eval_result_json(result);
        if (eval_report.empty()) std::cout << text;
        else write_text(eval_report, text);
        return 0;
    }

    if (*cmd_bench) {
        PhotonCube cube = read_cube(bench_cube);
        SensorModel sensor = load_sensor(bench_calib, cube, 0);
        ReconConfig cfg = bench_cfg.empty() ? ReconConfig{} : ReconConfig::from_file(bench_cfg);
        BenchAxis axis = bench_axis == "pixels" ? BenchAxis::Pixels : BenchAxis::ActiveBins;
        BenchResult result = bench_scaling(cube, sensor, cfg, axis, parse_levels(bench_levels),
                                           bench_iters, bench_repeats);
        std::string csv = bench_to_csv(result);
        if (bench_out.empty()) std::cout << csv;
        else write_text(bench_out, csv);
        return 0;
    }

    if (*cmd_sweep) {
        SceneSpec scene = SceneSpec::from_file(sweep_scene);
        ReconConfig cfg = sweep_cfg.empty() ? ReconConfig{} : ReconConfig::from_file(sweep_cfg);
        auto rows = sweep_operating_conditions(
            scene, cfg, KeyValueFile::to_double_list(sweep_ppp, "ppp"),
            KeyValueFile::to_double_list(sweep_sbr, "sbr"), sweep_seeds, sweep_tau, sweep_seed0);
        std::string csv = sweep_to_csv(rows);
        if (sweep_out.empty()) std::cout << csv;
        else write_text(sweep_out, csv);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const splidar::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
