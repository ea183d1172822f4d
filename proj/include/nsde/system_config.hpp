#pragma once

#include "json.hpp"
#include "nsde/sde_mc.hpp"
#include "nsde/system.hpp"

namespace nsde {

using Json = nlohmann::json;

/// Builds a system from its JSON description:
///
///   {"kind": "linear", "A": [[..]], "G": [[..]]}
///   {"kind": "rnn", "tau": 1, "A": [[..]], "c": 0.5, "sigmoid": "tanh", "gamma": 1}
///   {"kind": "custom-expression", "dimension": 2,
///    "drift": ["-x1 + tanh(x2)", "-x2"],
///    "diffusion": [["1", 0], [0, "1 + 0.1*sin(x1)"]],
///    "jacobian": [["-1", "1 - tanh(x2)^2"], ["0", "-1"]]}   (optional)
///
/// Matrices are row-major nested arrays; a bare number is a 1×1 matrix. Any
/// kind accepts "ellipticity": {"lambda0": .., "lambda1": ..}. A custom
/// system without it gets constants sampled over "ellipticity_box"
/// (default [-5, 5]^d), which is recorded in the resolved config.
ControlAffineSystem system_from_json(Json& j);

Vec vec_from_json(const Json& j, const char* what);
Mat mat_from_json(const Json& j, const char* what);
Json to_json(const Vec& v);
Json to_json(const Mat& m);

Box box_from_json(const Json& j, int dim);
PiSampler pi_from_json(Json& j, int dim);

}  // namespace nsde
