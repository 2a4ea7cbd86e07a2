#pragma once

#include "spe/problem.hpp"
#include "spe/reformulate.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spe {

class InvalidWitness : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LeaderPoint {
  Vec z, x;
};

/// Recession direction of the relaxed KKT constraint set at a fixed leader point.
/// `ray` is in canonical model order with zero z and x parts.
struct UnboundedRayCertificate {
  LeaderPoint witness;
  Vec ray;
  double growth = 0.0;  // Σ_b ω_b π̃0ᵀE ẋ

  Vec part(const BilevelSpeProblem& p, VarKind k) const;
};

/// Largest t ∈ [0, 1] such that ẋ = t·x̄ admits some ż ∈ [0, z̄] inside the leader polyhedron.
LeaderPoint default_witness(const BilevelSpeProblem& p);

/// Maximises the growth rate over the normalised recession cone. nullopt when the optimum is ≤ 1e-6.
std::optional<UnboundedRayCertificate> find_unbounded_ray(const BilevelSpeProblem& p, const LeaderPoint& witness);

struct CertificateCheck {
  double residual = 0.0;      // recession system, absolute
  double sign = 0.0;          // worst negative entry among sign-restricted components
  double bounded_part = 0.0;  // largest |ỹ_i|, |w̃_i| at finite bounds
  double growth = 0.0;

  bool valid(double tol = 1e-8) const { return residual <= tol && sign <= tol && bounded_part <= tol && growth > 1e-6; }
};

CertificateCheck check_certificate(const BilevelSpeProblem& p, const UnboundedRayCertificate& c);

/// Certificate from explicit components (θ vectors full length).
UnboundedRayCertificate make_certificate(const BilevelSpeProblem& p, const LeaderPoint& witness, const Vec& y,
                                         const Vec& w, const Vec& pi0, const Vec& pi1, const Vec& mu_y,
                                         const Vec& mu_w, const Vec& theta_y, const Vec& theta_w);

struct RayFamilyPoint {
  double rho = 0.0;
  double violation = 0.0;  // linear + bounds of the relaxed KKT constraint set
  double objective = 0.0;  // KKT objective at v0 + ρ·ray
  double predicted = 0.0;  // objective(v0) + ρ·growth
};

/// Walks v0 + ρ·ray from a relaxation-feasible base point at the witness. Empty if no base point exists.
std::vector<RayFamilyPoint> simulate_ray_family(const BilevelSpeProblem& p, const UnboundedRayCertificate& c,
                                                const std::vector<double>& rhos);

enum class Boundedness { Bounded, Unknown };

struct BoundednessReport {
  Boundedness status = Boundedness::Unknown;
  std::string reason;
};

BoundednessReport check_duality_bounded(const BilevelSpeProblem& p);

std::string certificate_json(const BilevelSpeProblem& p, const UnboundedRayCertificate& c);

/// Points of the relaxed single-level constraint set: projections of random targets and their convex combinations.
std::vector<Vec> sample_relaxation_points(const SingleLevelModel& m, int count, unsigned long long seed);

}  // namespace spe
