#pragma once

#include "starsee/channel.hpp"
#include "starsee/conic.hpp"
#include "starsee/metrics.hpp"
#include "starsee/robust_lmi.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace starsee {

struct PccpConfig {
  double lambda0 = 1e-3;
  double growth = 10.0;
  double lambda_max = 1e6;
  double eps_step = 1e-3;     // on ||u - u_prev||_1
  double eps_penalty = 1e-4;  // on the summed slack penalty
  int max_iterations = 25;
  int max_restarts = 3;
};

struct TsSearchConfig {
  double floor = 0.05;
  double resolution = 0.02;
  int grid_points = 5;
};

struct AOConfig {
  double tolerance = 1e-4;
  int max_iterations = 60;
  PccpConfig pccp;
  TsSearchConfig ts;
  std::uint64_t seed = 1;
  int restoration_rounds = 80;
  int restoration_restarts = 1;
  // A restoration round that gains less than this on the gap ends the attempt.
  double restoration_stall = 1e-3;
  // A block whose objective drops by more than this is rejected.
  double accept_slack = 1e-6;
  conic::SolverOptions solver = default_solver();

  static conic::SolverOptions default_solver() {
    conic::SolverOptions o;
    o.gap_tol = 1e-6;
    o.stall_tol = 1e-5;
    return o;
  }
};

enum class BlockStatus { NotRun, Ok, Infeasible, Rejected };
const char* to_string(BlockStatus s);

struct TraceRecord {
  int iteration = 0;
  double psi = 0.0;
  double see = 0.0;
  double penalty = 0.0;     // PCCP slack sum of the passive block
  double ms_penalty = 0.0;  // binary-amplitude penalty (MS)
  std::array<BlockStatus, 3> status{};
  double millis = 0.0;
};

// Optimizer view of one instance: channels are scaled so the noise power is 1.
struct Problem {
  ChannelRealization ch;
  SystemParams params;
  Protocol protocol = Protocol::ES;
  std::array<double, 2> tau{0.5, 0.5};

  static Problem normalized(const ChannelRealization& raw, const SystemParams& p, Protocol proto);
  int users(int k) const { return static_cast<int>(ch.bobs[k].size()); }
  double noise(int k) const { return protocol == Protocol::TS ? tau[k] : 1.0; }
  double rate_weight(int k) const { return protocol == Protocol::TS ? tau[k] : 1.0; }
  double rate_min(int k) const { return params.rate_min / rate_weight(k); }
  double leak_max(int k) const { return params.leak_max / rate_weight(k); }
  // Surface vector Eve e observes while stream k is sent.
  CVec eve_surface(const BeamformingState& s, int k, int e) const;
};

struct Stream {
  int k;
  int j;
};
std::vector<Stream> streams(const Problem& pr);

// Values of the last accepted solve; they are the expansion points of the next.
struct Slacks {
  std::vector<double> r;
  std::vector<std::array<double, 2>> r_eve;
  std::vector<std::vector<double>> eta;  // per stream and decoder
  std::vector<std::array<double, 2>> eta_eve;
  std::array<std::vector<double>, 2> order;  // decoding-order thresholds per space
  double psi = 0.0;
  double rho = 0.0;
};

// Closed-form bounds from the triangle inequality, used before any certificate exists.
Slacks conservative_slacks(const Problem& pr, const BeamformingState& s);

enum class Block { Power, Active, Passive };
enum class Goal { Secrecy, Restore };

struct PenaltyState {
  double lambda = 1e-3;
  double ms_lambda = 1e-3;
  std::array<Eigen::VectorXd, 2> ms_target;  // d per element (MS)
};

struct BlockResult {
  conic::SolveStatus status = conic::SolveStatus::NumericalFailure;
  BeamformingState state;
  Slacks slacks;
  double objective = 0.0;  // psi, or -gap when restoring
  double penalty = 0.0;
  double ms_penalty = 0.0;
  std::array<Eigen::VectorXd, 2> amplitude;  // b from the passive block
  std::vector<robust::BlockInfo> lmis;
  int num_vars = 0;
  int precoder_vars = 0;  // real variables per precoder in the active block
};

// Builds and solves one convex subproblem around (state, slacks).
BlockResult solve_block(const Problem& pr, const BeamformingState& state, const Slacks& slacks, Block block,
                        Goal goal, const PenaltyState* pen, const conic::SolverOptions& opts);

// d = (b + b^2) / (1 + b^2)
double ms_target(double b);

// t = rho / psi with psi clamped away from zero.
double bilinear_point(double psi, double rho);

// Fixed SF pattern: the first half of the elements reflect, the rest transmit.
bool sf_reflects(int m, int M);

BeamformingState init_state(const Problem& pr, std::uint64_t seed);

struct PassiveOutcome {
  BlockStatus status = BlockStatus::NotRun;
  BlockResult result;
  int iterations = 0;
  bool converged = false;
};
PassiveOutcome pccp_passive(const Problem& pr, const BeamformingState& state, const Slacks& slacks, Goal goal,
                            double reference, const AOConfig& cfg);

struct AOResult {
  Problem problem;  // Bobs sorted so that j = 0 is the strongest
  BeamformingState state;
  Slacks slacks;
  std::vector<TraceRecord> trace;
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
  SecrecyReport report;  // on estimated channels, noise 1
  std::string note;
};

// Feasibility phase: drives every robust constraint to a strict margin.
struct Restoration {
  bool ok = false;
  BeamformingState state;
  Slacks slacks;
  int rounds = 0;
};
Restoration restore_feasibility(const Problem& pr, BeamformingState state, const AOConfig& cfg);

AOResult ao_run(const Problem& pr, const AOConfig& cfg);

struct TsResult {
  AOResult best;
  double tau_r = 0.5;
  std::vector<std::pair<double, double>> evaluated;  // (tau_r, SEE)
  bool used_grid_fallback = false;
};
TsResult ts_two_layer(const Problem& pr, const AOConfig& cfg);

struct OmaResult {
  std::vector<AOResult> slots;
  std::vector<bool> slot_feasible;
  bool feasible = false;
  double ssr = 0.0;
  double power = 0.0;
  double see = 0.0;
};
OmaResult oma_baseline(const Problem& pr, const AOConfig& cfg);

// Block sizes and worst-case complexity orders of the three subproblems.
struct LmiRow {
  std::string label;
  int size = 0;  // complex order
  int count = 0;
};
struct ComplexityEstimate {
  int n1 = 0, n2 = 0, n3 = 0;
  int a1 = 0, a3 = 0;
  std::vector<int> a2;  // indexed by the 1-based stream position j (entry 0 unused)
  int sigma = 0;        // sum_k sum_j j
  std::vector<LmiRow> rows;
  double f1 = 0, f2 = 0, f3 = 0;
  double o_alpha = 0, o_f = 0, o_phi = 0;
};
ComplexityEstimate complexity_estimate(int N, int M, int J_r, int J_t);

// Hermitian block orders (complex) the active subproblem would contain.
std::vector<int> predicted_active_blocks(int N, int M, int J_r, int J_t);

// Every robust inequality that the state is certified for, for sampling audits.
std::vector<robust::RobustInequality> certified_inequalities(const Problem& pr, const BeamformingState& s,
                                                             const Slacks& sl);

}  // namespace starsee
