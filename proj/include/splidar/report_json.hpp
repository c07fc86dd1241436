#pragma once

#include "splidar/eval.hpp"
#include "splidar/reconstruct.hpp"

#include <json.hpp>

#include <string>

namespace splidar {

/// Reconstruction report as JSON text. Wall-clock fields are included only
/// on request so that report files are byte-stable across identical runs.
inline std::string recon_report_json(const ReconReport& r, bool timings) {
    nlohmann::ordered_json j{{"iterations", r.iterations},
                             {"init_nll", r.init_nll},
                             {"final_nll", r.final_nll},
                             {"points", r.points},
                             {"nll_trace", r.nll_trace}};
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const StepDiagnostics& s : r.steps) {
        steps.push_back(nlohmann::ordered_json{{"nll_before", s.nll_before},
                                               {"nll_after", s.nll_after},
                                               {"points_after", s.points_after},
                                               {"depth_step", s.depth.step_used},
                                               {"intensity_step", s.intensity.step_used},
                                               {"background_step", s.background.step_used}});
    }
    j["steps"] = steps;
    if (timings) {
        j["init_seconds"] = r.init_seconds;
        j["iterate_seconds"] = r.iterate_seconds;
        j["total_seconds"] = r.total_seconds;
    }
    return j.dump(2) + "\n";
}

inline std::string eval_result_json(const EvalResult& e) {
    nlohmann::ordered_json j{{"recall", e.recall},
                             {"false_point_rate", e.false_point_rate},
                             {"depth_rmse_m", e.depth_rmse},
                             {"intensity_mae", e.intensity_mae},
                             {"n_truth", e.n_truth},
                             {"n_est", e.n_est},
                             {"n_matched", e.n_matched}};
    return j.dump(2) + "\n";
}

}  // namespace splidar
