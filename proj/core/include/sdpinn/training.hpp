#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdpinn/geometry.hpp"
#include "sdpinn/jet.hpp"
#include "sdpinn/lbfgs.hpp"
#include "sdpinn/mlp.hpp"
#include "sdpinn/problems.hpp"

namespace sdpinn {

enum class Method {
  pinn,          // one network on the whole rectangle
  xpinn,         // one network per band, coupled by interface penalties
  sdpinn,        // one independent network per band with orbit-labeled interfaces
  sdpinn_isc,    // sdpinn plus the invariant surface condition penalty
  inverse,       // sdpinn on one band with λ trainable
  inverse_pinn,  // whole-rectangle baseline for the inverse problem
};

const char* to_string(Method m);
/// Throws ConfigError for an unknown name.
Method parse_method(const std::string& name);
bool is_inverse(Method m);
/// Methods whose sub-domain sessions are independent.
bool is_decomposed(Method m);

struct LossWeights {
  double w_u = 1.0;
  double w_f = 1.0;
  double w_g = 1.0;
  double w_I = 1.0;
  double w_p = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Knobs of one sub-domain's network and data.
struct SubdomainConfig {
  std::vector<int> layers = {2, 40, 40, 40, 40, 1};
  int n_u = 200;        // initial/boundary labels drawn from the condition grid
  int n_f = 2000;       // collocation points
  int n_g = 0;          // ISC points; 0 means reuse the collocation set
  int n_interface = kDefaultInterfacePoints;
  int n_p = 600;        // orbit-generated interior labels (inverse only)
  OptimConfig optim;
  LossWeights weights;

  void validate(Method m) const;
};

/// Everything a training session needs besides the problem and partition.
struct TrainingConfig {
  Method method = Method::sdpinn;
  /// One entry per sub-domain, or a single entry applied to all.
  std::vector<SubdomainConfig> subdomains = {SubdomainConfig{}};
  int condition_nx = 400;  // condition grid along the initial edge
  int condition_nt = 200;  // condition grid along each boundary edge
  std::uint64_t seed = 0;
  double lambda_init = 0.0;
  double label_eps = 0.05;  // group parameter step for interior labels
  int label_kmax = 20;
  int target_subdomain = 0;  // inverse problems
  int report_every = 100;

  const SubdomainConfig& for_subdomain(std::size_t i) const;
  void validate(std::size_t subdomain_count) const;
};

/// Unweighted loss terms; absent terms are empty. total = Σ weight·term.
struct LossReport {
  std::optional<double> mse_u, mse_f, mse_g, mse_r, mse_u_avg, mse_p;
  double total = 0.0;

  static LossReport from_terms(const TermList& terms, const LossWeights& w);
};

/// Iteration-tagged loss reports; CSV header iteration,total,MSE_u,MSE_f,MSE_g,MSE_R,MSE_u_avg,MSE_p.
struct ReportHistory {
  std::vector<std::pair<int, LossReport>> rows;
  void write_csv(std::ostream& os) const;
};

/// Training data of one sub-domain session.
struct SubdomainData {
  int subdomain = 0;
  Architecture arch;
  std::vector<LabeledPoint> conditions;  // N_u initial/boundary labels
  std::vector<LabeledPoint> interface;   // orbit labels on the dividing lines
  std::vector<Point> collocation;
  std::vector<Point> isc;                // empty when reusing collocation
  std::vector<LabeledPoint> interior;    // S_ld (inverse methods)
};

/// Conditions, interface labels and collocation points of one band, drawn
/// from streams keyed by (config.seed, subdomain). Interior labels are left
/// to interior_labels_for().
SubdomainData prepare_subdomain_data(const ProblemSpec& problem, const Partition& part,
                                     int subdomain, const SubdomainConfig& sc,
                                     const TrainingConfig& config);

/// N_p labels sampled from generate_interior_labels() seeded by the band's
/// full condition grid.
std::vector<LabeledPoint> interior_labels_for(const ProblemSpec& problem, const Partition& part,
                                              int subdomain, const SubdomainConfig& sc,
                                              const TrainingConfig& config);

/// The objective of one independent session.
class SubdomainLoss : public JetObjective {
 public:
  SubdomainLoss(const ProblemSpec& problem, const SubdomainData& data, Method method,
                const LossWeights& weights, double fixed_lambda);

  /// Batches in the order the objective expects.
  std::vector<BatchSpec> batches() const;
  bool trains_lambda() const { return train_lambda_; }

  double evaluate(std::span<const JetBatch> jets, std::span<const double> aux,
                  std::span<JetBatch> adjoints, std::span<double> aux_grad,
                  TermList* terms) const override;

 private:
  const ProblemSpec& problem_;
  const SubdomainData& data_;
  LossWeights w_;
  bool use_isc_;
  bool train_lambda_;
  double fixed_lambda_;
  std::vector<double> labels_;
  std::vector<double> mu_;
  std::vector<double> interior_labels_;
};

/// The joint objective of all sub-domain networks with interface coupling.
class XpinnLoss : public JetObjective {
 public:
  struct Interface {
    int lower = 0;  // band above the line (larger I1)
    int upper = 0;  // band below the line
    std::vector<Point> points;
  };

  XpinnLoss(const ProblemSpec& problem, std::vector<SubdomainData> data,
            std::vector<Interface> interfaces, const LossWeights& weights);

  std::vector<BatchSpec> batches() const;
  double evaluate(std::span<const JetBatch> jets, std::span<const double> aux,
                  std::span<JetBatch> adjoints, std::span<double> aux_grad,
                  TermList* terms) const override;

  const std::vector<SubdomainData>& data() const { return data_; }

 private:
  const ProblemSpec& problem_;
  std::vector<SubdomainData> data_;
  std::vector<Interface> interfaces_;
  LossWeights w_;
  std::vector<std::vector<double>> labels_, mu_;
  std::vector<std::vector<double>> interface_mu_;
};

struct SessionResult {
  int subdomain = 0;
  Architecture arch;
  ParameterVector params;
  std::optional<double> lambda;
  OptTrace trace;
  ReportHistory reports;
  LossReport final_report;
  std::vector<LabeledPoint> interface_labels;
  bool failed = false;
  std::string failure;
};

/// Independent session for pinn, sdpinn, sdpinn_isc, inverse or inverse_pinn.
SessionResult train_subdomain(const ProblemSpec& problem, const Partition& part, int subdomain,
                              const TrainingConfig& config);

/// Joint optimization of every sub-domain network; one result per sub-domain
/// sharing the trace.
std::vector<SessionResult> train_xpinn(const ProblemSpec& problem, const Partition& part,
                                       const TrainingConfig& config);

struct InverseState {
  double lambda = 0.0;
  double true_lambda = 1.0;
  double relative_error() const;
};

struct InverseResult {
  InverseState state;
  SessionResult session;
};

/// Trains on config.target_subdomain (inverse) or on the whole rectangle
/// with the target sub-domain's interior labels (inverse_pinn).
InverseResult train_inverse(const ProblemSpec& problem, const Partition& part,
                            const TrainingConfig& config);

/// Orbits of every condition point in both directions for k = 1..k_max,
/// kept where they fall inside the sub-domain. Throws ConfigError if empty.
std::vector<LabeledPoint> generate_interior_labels(const SymmetryGroup& group,
                                                   std::span<const ConditionPoint> seeds,
                                                   double eps, int k_max, const Partition& part,
                                                   const SubDomain& sd);

/// Predictions and exact values on an n_x × n_t grid (x fastest).
struct SolutionGrid {
  int n_x = 0;
  int n_t = 0;
  std::vector<double> x, t;
  Eigen::ArrayXd pred, exact;
  std::vector<int> subdomain;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * n_x + i; }
  /// CSV with header x,t,pred,exact,abs_err,subdomain.
  void write_csv(std::ostream& os) const;
};

struct TrainedNetwork {
  Architecture arch;
  ParameterVector params;
};

SolutionGrid stitch(std::span<const TrainedNetwork> networks, const Partition& part,
                    const ProblemSpec& problem, int n_x, int n_t);

/// ‖pred − exact‖₂ / ‖exact‖₂ over the grid or over one sub-domain's points.
/// Throws DomainError when the exact norm is zero.
double l2_relative_error(const SolutionGrid& grid, std::optional<int> subdomain = std::nullopt);

/// max |u_a − u_b| over n probe points spread along the dividing line I1 = level.
double interface_discontinuity(const TrainedNetwork& a, const TrainedNetwork& b,
                               const SymmetryGroup& group, const DomainRect& rect, double level,
                               int n_probes);

/// Root-mean-square misfit of a network on labeled points.
double rms_misfit(const TrainedNetwork& net, std::span<const LabeledPoint> labels);

/// Text checkpoint: header line, widths, input scaling, aux values, parameters.
void write_checkpoint(std::ostream& os, const Architecture& arch, const ParameterVector& params,
                      std::span<const double> aux = {});
struct Checkpoint {
  Architecture arch;
  ParameterVector params;
  std::vector<double> aux;
};
/// Throws ConfigError on a malformed file.
Checkpoint read_checkpoint(std::istream& is);

}  // namespace sdpinn
