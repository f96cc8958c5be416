#pragma once

#include <string>
#include <vector>

#include "xmodal/nn.hpp"

namespace xmodal {

// Probabilities are clamped below at this floor before logs and divisions.
constexpr double kProbFloor = 1e-12;

enum class PeerKind { kKL, kCrossEntropyHard };

// Selector for the distillation loss driving a student update.
//  kKL               KL(student^tau || teacher^tau), both softened at tau
//  kCrossEntropyHard -log p_student(argmax teacher), everything at tau = 1
//  kMutual           hard CE against the teacher plus the mean peer term
struct LossKind {
  enum class Type { kKL, kCrossEntropyHard, kMutual };

  Type type = Type::kCrossEntropyHard;
  double tau = 1.0;                       // KL softening / peer softening
  PeerKind peer_kind = PeerKind::kKL;     // mutual only
  bool reverse_kl = false;                // KL(teacher || student) instead
  bool tau_squared = false;               // opt-in classic tau^2 rescaling

  static LossKind kl(double tau) {
    LossKind k;
    k.type = Type::kKL;
    k.tau = tau;
    return k;
  }
  static LossKind ce_hard() { return LossKind{}; }
  static LossKind mutual(PeerKind peer, double tau) {
    LossKind k;
    k.type = Type::kMutual;
    k.peer_kind = peer;
    k.tau = tau;
    return k;
  }

  std::string name() const;  // "kl", "ce", "mutual_kl", "mutual_ce"
  void validate() const;     // tau > 0
};

// KL(p_student || p_teacher) exactly as summed over classes; zero student
// entries contribute nothing, teacher entries are clamped at kProbFloor.
double kl_loss(const ProbVector& p_student, const ProbVector& p_teacher);

// -log p_student(argmax p_teacher), lowest index on argmax ties.
double ce_hard_loss(const ProbVector& p_student, const ProbVector& p_teacher);

// Loss for student k in a K-member ensemble: hard CE against the teacher
// plus 1/(K-1) times the summed peer terms. Peer probabilities at tau are
// recomputed internally from logits_all; p_all holds the tau = 1 softmaxes.
double mutual_loss(int k, const std::vector<ProbVector>& p_all,
                   const std::vector<LogitVector>& logits_all,
                   const ProbVector& p_teacher, double tau, PeerKind peer_kind);

// --- gradients w.r.t. the student's logits (teacher and peers constant) ---

Vec ce_hard_grad(const LogitVector& student_logits, int teacher_label);

// Gradient of KL(softmax(z/tau) || target) w.r.t. z. `target` must already be
// softened at the same tau. reverse_kl flips the argument order.
Vec kl_grad(const LogitVector& student_logits, const ProbVector& target_tau, double tau,
            bool reverse_kl = false, bool tau_squared = false);

Vec mutual_grad(int k, const std::vector<LogitVector>& logits_all,
                const ProbVector& p_teacher, double tau, PeerKind peer_kind);

// Context handed to the generic dispatcher: whatever the selected loss
// needs. teacher_logits are required for the KL kinds (the tau-softened
// target is derived from them), teacher_probs for the CE kinds, peer_logits
// for mutual.
struct LossContext {
  const ProbVector* teacher_probs = nullptr;
  const LogitVector* teacher_logits = nullptr;
  const std::vector<LogitVector>* peer_logits = nullptr;
  int self_index = 0;
};

double loss_value(const LossKind& kind, const LogitVector& z, const LossContext& ctx);
Vec loss_grad_wrt_logits(const LossKind& kind, const LogitVector& z, const LossContext& ctx);

}  // namespace xmodal
