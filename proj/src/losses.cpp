#include "xmodal/losses.hpp"

#include <cmath>
#include <string>

namespace xmodal {

std::string LossKind::name() const {
  switch (type) {
    case Type::kKL:
      return reverse_kl ? "kl_rev" : "kl";
    case Type::kCrossEntropyHard:
      return "ce";
    case Type::kMutual:
      return peer_kind == PeerKind::kKL ? "mutual_kl" : "mutual_ce";
  }
  return "?";
}

void LossKind::validate() const {
  if (!(tau > 0.0)) throw ConfigError("LossKind: tau must be positive");
}

double kl_loss(const ProbVector& p_student, const ProbVector& p_teacher) {
  if (p_student.size() != p_teacher.size())
    throw ShapeError("kl_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t c = 0; c < p_student.size(); ++c) {
    const double ps = p_student[c];
    if (ps <= 0.0) continue;  // 0 log 0 term
    const double pt = std::max(p_teacher[c], kProbFloor);
    sum += ps * (std::log(ps) - std::log(pt));
  }
  return sum;
}

double ce_hard_loss(const ProbVector& p_student, const ProbVector& p_teacher) {
  if (p_student.size() != p_teacher.size())
    throw ShapeError("ce_hard_loss: length mismatch");
  const int label = argmax_lowest(p_teacher);
  return -std::log(std::max(p_student[label], kProbFloor));
}

double mutual_loss(int k, const std::vector<ProbVector>& p_all,
                   const std::vector<LogitVector>& logits_all, const ProbVector& p_teacher,
                   double tau, PeerKind peer_kind) {
  const int num_students = static_cast<int>(p_all.size());
  if (num_students < 2) throw ConfigError("mutual_loss: needs at least 2 students");
  if (static_cast<int>(logits_all.size()) != num_students)
    throw ShapeError("mutual_loss: p_all / logits_all length mismatch");
  if (k < 0 || k >= num_students) throw ShapeError("mutual_loss: student index out of range");
  if (!(tau > 0.0)) throw DomainError("mutual_loss: tau must be positive");

  double loss = ce_hard_loss(p_all[k], p_teacher);
  double peer_sum = 0.0;
  if (peer_kind == PeerKind::kKL) {
    const ProbVector self_tau = softened_softmax(logits_all[k], tau);
    for (int l = 0; l < num_students; ++l) {
      if (l == k) continue;
      peer_sum += kl_loss(self_tau, softened_softmax(logits_all[l], tau));
    }
  } else {
    for (int l = 0; l < num_students; ++l) {
      if (l == k) continue;
      peer_sum += ce_hard_loss(p_all[k], p_all[l]);
    }
  }
  return loss + peer_sum / static_cast<double>(num_students - 1);
}

Vec ce_hard_grad(const LogitVector& student_logits, int teacher_label) {
  if (teacher_label < 0 || teacher_label >= static_cast<int>(student_logits.size()))
    throw ShapeError("ce_hard_grad: teacher label out of range");
  Vec g = softened_softmax(student_logits, 1.0);
  g[teacher_label] -= 1.0;
  return g;
}

Vec kl_grad(const LogitVector& student_logits, const ProbVector& target_tau, double tau,
            bool reverse_kl, bool tau_squared) {
  if (student_logits.size() != target_tau.size()) throw ShapeError("kl_grad: length mismatch");
  const double scale = (tau_squared ? tau * tau : 1.0) / tau;
  Vec g(student_logits.size());
  if (reverse_kl) {
    // d/dz KL(t || softmax(z/tau)) = (s - t) / tau
    const ProbVector s = softened_softmax(student_logits, tau);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = scale * (s[j] - target_tau[j]);
    return g;
  }
  // d/dz KL(softmax(z/tau) || t): s_j * (log(s_j/t_j) - KL) / tau
  const Vec logs = log_softened_softmax(student_logits, tau);
  Vec diff(logs.size());
  double kl = 0.0;
  for (std::size_t j = 0; j < logs.size(); ++j) {
    diff[j] = logs[j] - std::log(std::max(target_tau[j], kProbFloor));
    kl += std::exp(logs[j]) * diff[j];
  }
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = scale * std::exp(logs[j]) * (diff[j] - kl);
  return g;
}

Vec mutual_grad(int k, const std::vector<LogitVector>& logits_all, const ProbVector& p_teacher,
                double tau, PeerKind peer_kind) {
  const int num_students = static_cast<int>(logits_all.size());
  if (num_students < 2) throw ConfigError("mutual_grad: needs at least 2 students");
  if (k < 0 || k >= num_students) throw ShapeError("mutual_grad: student index out of range");

  Vec g = ce_hard_grad(logits_all[k], argmax_lowest(p_teacher));
  const double w = 1.0 / static_cast<double>(num_students - 1);
  for (int l = 0; l < num_students; ++l) {
    if (l == k) continue;
    Vec pg;
    if (peer_kind == PeerKind::kKL) {
      pg = kl_grad(logits_all[k], softened_softmax(logits_all[l], tau), tau);
    } else {
      pg = ce_hard_grad(logits_all[k], argmax_lowest(softened_softmax(logits_all[l], 1.0)));
    }
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * pg[j];
  }
  return g;
}

double loss_value(const LossKind& kind, const LogitVector& z, const LossContext& ctx) {
  kind.validate();
  switch (kind.type) {
    case LossKind::Type::kKL: {
      if (ctx.teacher_logits == nullptr) throw ConfigError("loss_value: KL needs teacher logits");
      const ProbVector t = softened_softmax(*ctx.teacher_logits, kind.tau);
      const ProbVector s = softened_softmax(z, kind.tau);
      const double scale = kind.tau_squared ? kind.tau * kind.tau : 1.0;
      return scale * (kind.reverse_kl ? kl_loss(t, s) : kl_loss(s, t));
    }
    case LossKind::Type::kCrossEntropyHard: {
      if (ctx.teacher_probs == nullptr) throw ConfigError("loss_value: CE needs teacher probs");
      return ce_hard_loss(softened_softmax(z, 1.0), *ctx.teacher_probs);
    }
    case LossKind::Type::kMutual: {
      if (ctx.teacher_probs == nullptr || ctx.peer_logits == nullptr)
        throw ConfigError("loss_value: mutual needs teacher probs and peer logits");
      // Substitute z into the student's own slot; only the peers are constants.
      std::vector<LogitVector> logits_all = *ctx.peer_logits;
      logits_all.at(ctx.self_index) = z;
      std::vector<ProbVector> p_all;
      p_all.reserve(logits_all.size());
      for (const auto& logits : logits_all) p_all.push_back(softened_softmax(logits, 1.0));
      return mutual_loss(ctx.self_index, p_all, logits_all, *ctx.teacher_probs, kind.tau,
                         kind.peer_kind);
    }
  }
  throw ConfigError("loss_value: unknown loss kind");
}

Vec loss_grad_wrt_logits(const LossKind& kind, const LogitVector& z, const LossContext& ctx) {
  kind.validate();
  switch (kind.type) {
    case LossKind::Type::kKL: {
      if (ctx.teacher_logits == nullptr)
        throw ConfigError("loss_grad_wrt_logits: KL needs teacher logits");
      const ProbVector t = softened_softmax(*ctx.teacher_logits, kind.tau);
      return kl_grad(z, t, kind.tau, kind.reverse_kl, kind.tau_squared);
    }
    case LossKind::Type::kCrossEntropyHard: {
      if (ctx.teacher_probs == nullptr)
        throw ConfigError("loss_grad_wrt_logits: CE needs teacher probs");
      return ce_hard_grad(z, argmax_lowest(*ctx.teacher_probs));
    }
    case LossKind::Type::kMutual: {
      if (ctx.teacher_probs == nullptr || ctx.peer_logits == nullptr)
        throw ConfigError("loss_grad_wrt_logits: mutual needs teacher probs and peer logits");
      std::vector<LogitVector> logits_all = *ctx.peer_logits;
      logits_all.at(ctx.self_index) = z;
      return mutual_grad(ctx.self_index, logits_all, *ctx.teacher_probs, kind.tau, kind.peer_kind);
    }
  }
  throw ConfigError("loss_grad_wrt_logits: unknown loss kind");
}

}  // namespace xmodal
