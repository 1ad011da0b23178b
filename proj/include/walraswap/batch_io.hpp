// Batch-file front end: parse a walraswap_batch_v1 JSON description into an
// equilibrium problem, run solve + settle, and emit a walraswap_report_v1
// JSON report plus a human summary. Reports echo a digest of the input so a
// third party can re-verify every certificate against the exact batch.
#pragma once

#include "walraswap/clearing.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace walraswap {

struct BatchOptions {
    SolverConfig solver;
    double surplus_tol = 1e-8;
    bool strict_required = false;
    unsigned seed = 12345;
};

// Which one-directional AMMs a two-sided input pool produced.
struct PoolRef {
    int amm_ab = -1;
    int amm_ba = -1;
};

struct ParsedBatch {
    std::vector<std::string> tokens;  // symbols, index order = token index
    EquilibriumProblem problem;
    BatchOptions options;
    std::vector<PoolRef> pools;
    std::string digest;  // fnv1a64 over the input bytes
    StrictnessReport strictness;
    bool sell_cover_ok = false;
    std::vector<int> uncovered_tokens;
};

class BatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ParsedBatch parse_batch_text(const std::string& text);
ParsedBatch parse_batch(const std::string& path);

struct ClearRun {
    std::string status;  // CERTIFIED | FAILED | NO_EQUILIBRIUM
    int exit_code = 0;   // 0 certified, 2 no equilibrium, 3 failed certification
    EquilibriumResult result;
    std::optional<ClearingOutcome> outcome;
};

ClearRun run_clear(const ParsedBatch& batch);

std::string render_report(const ParsedBatch& batch, const ClearRun& run);
std::string render_summary(const ParsedBatch& batch, const ClearRun& run);

// Re-derives the certificates of a written report against its batch file:
// digest, residual, both surplus paths, nonnegativity, and optimality
// perturbations. Returns 0 when everything holds, 1 otherwise with the
// first failing check in `message`.
int verify_report_files(const std::string& batch_path, const std::string& report_path,
                        std::string* message = nullptr);

std::string fnv1a64_hex(const std::string& bytes);

}  // namespace walraswap
