#include "xmodal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmodal/rng.hpp"

namespace xmodal {

namespace {

struct LossParts {
  double teacher = 0.0;
  double peer = 0.0;
};

// The one mini-batch SGD loop behind every single-network regime. Gradients
// are averaged over the batch; the shuffle schedule is a pure function of
// hyper.seed, so two regimes fed the same per-sample callbacks take exactly
// the same arithmetic path.
template <typename LossFn, typename GradFn, typename RefLabelFn>
TrainHistory sgd_train(MlpNetwork& net, const std::vector<Vec>& inputs, LossFn&& loss_fn,
                       GradFn&& grad_fn, RefLabelFn&& ref_label, const TrainHyper& hyper,
                       const EpochObserver& observer) {
  hyper.validate();
  if (inputs.empty()) throw ConfigError("training requires a non-empty sample set");

  const int n = static_cast<int>(inputs.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(hyper.seed);

  TrainHistory history;
  history.reserve(hyper.epochs);
  GradientSet grads = net.zero_gradients();
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double teacher_sum = 0.0;
    double peer_sum = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += hyper.batch_size) {
      const int bs = std::min(hyper.batch_size, n - start);
      grads.set_zero();
      for (int i = 0; i < bs; ++i) {
        const int idx = order[start + i];
        const auto trace = net.forward_trace(inputs[idx]);
        const LogitVector& logits = trace.act.back();
        const LossParts parts = loss_fn(idx, logits);
        teacher_sum += parts.teacher;
        peer_sum += parts.peer;
        if (argmax_lowest(logits) == ref_label(idx)) ++correct;
        net.backward_into(trace, grad_fn(idx, logits), grads);
      }
      grads.scale(1.0 / bs);
      net.sgd_step(grads, hyper.learning_rate);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.teacher_term = teacher_sum / n;
    rec.peer_term = peer_sum / n;
    rec.mean_loss = rec.teacher_term + rec.peer_term;
    rec.train_accuracy = static_cast<double>(correct) / n;
    history.push_back(rec);
    if (observer) observer(epoch, net);
  }
  return history;
}

// Hard cross-entropy on the softmax at tau = 1 against a fixed label.
LossParts ce_parts(const ProbVector& p, int label) {
  return {-std::log(std::max(p[label], kProbFloor)), 0.0};
}

void check_labels(const std::vector<int>& labels, int num_classes) {
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw ConfigError("label out of range");
  }
}

}  // namespace

void TrainHyper::validate() const {
  if (epochs < 0) throw ConfigError("TrainHyper: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainHyper: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainHyper: learning_rate must be positive");
}

std::string combine_mode_name(CombineMode mode) {
  return mode == CombineMode::kAverage ? "average" : "max";
}

void DistillConfig::validate() const {
  hyper.validate();
  loss.validate();
  if (num_students < 1) throw ConfigError("DistillConfig: num_students must be >= 1");
  if (loss.type == LossKind::Type::kMutual && num_students < 2)
    throw ConfigError("DistillConfig: mutual learning requires at least 2 students");
}

TrainHistory train_supervised(MlpNetwork& net, const std::vector<Vec>& inputs,
                              const std::vector<int>& labels, const TrainHyper& hyper,
                              const EpochObserver& observer) {
  if (inputs.size() != labels.size())
    throw ShapeError("train_supervised: inputs and labels misaligned");
  check_labels(labels, net.num_classes());
  return sgd_train(
      net, inputs,
      [&](int idx, const LogitVector& z) {
        return ce_parts(softened_softmax(z, 1.0), labels[idx]);
      },
      [&](int idx, const LogitVector& z) { return ce_hard_grad(z, labels[idx]); },
      [&](int idx) { return labels[idx]; }, hyper, observer);
}

TrainHistory distill_single(MlpNetwork& student, const std::vector<Vec>& inputs,
                            const TeacherCache& teacher, const LossKind& loss,
                            const TrainHyper& hyper, const EpochObserver& observer) {
  loss.validate();
  if (static_cast<int>(inputs.size()) != teacher.size())
    throw ShapeError("distill_single: inputs and teacher cache misaligned");
  if (loss.type == LossKind::Type::kMutual)
    throw ConfigError("distill_single: mutual loss requires an ensemble");

  if (loss.type == LossKind::Type::kCrossEntropyHard) {
    return sgd_train(
        student, inputs,
        [&](int idx, const LogitVector& z) {
          return ce_parts(softened_softmax(z, 1.0), teacher.hard_label(idx));
        },
        [&](int idx, const LogitVector& z) { return ce_hard_grad(z, teacher.hard_label(idx)); },
        [&](int idx) { return teacher.hard_label(idx); }, hyper, observer);
  }

  // KL: freeze the tau-softened teacher targets once.
  std::vector<ProbVector> targets;
  targets.reserve(teacher.size());
  for (int i = 0; i < teacher.size(); ++i) targets.push_back(teacher.probs_at(i, loss.tau));
  const double scale = loss.tau_squared ? loss.tau * loss.tau : 1.0;
  return sgd_train(
      student, inputs,
      [&](int idx, const LogitVector& z) {
        const ProbVector s = softened_softmax(z, loss.tau);
        const double v =
            loss.reverse_kl ? kl_loss(targets[idx], s) : kl_loss(s, targets[idx]);
        return LossParts{scale * v, 0.0};
      },
      [&](int idx, const LogitVector& z) {
        return kl_grad(z, targets[idx], loss.tau, loss.reverse_kl, loss.tau_squared);
      },
      [&](int idx) { return teacher.hard_label(idx); }, hyper, observer);
}

TrainedEnsemble train_ensemble(std::vector<MlpNetwork> students, const std::vector<Vec>& inputs,
                               const TeacherCache& teacher, const DistillConfig& config,
                               bool mutual) {
  config.validate();
  if (students.empty()) throw ConfigError("train_ensemble: empty ensemble");
  if (mutual && students.size() < 2)
    throw ConfigError("train_ensemble: mutual learning requires at least 2 students");
  if (config.loss.type != LossKind::Type::kMutual)
    throw ConfigError("train_ensemble: loss kind must be mutual");
  if (static_cast<int>(inputs.size()) != teacher.size())
    throw ShapeError("train_ensemble: inputs and teacher cache misaligned");
  for (const auto& s : students) {
    if (s.layer_dims() != students.front().layer_dims())
      throw ConfigError("train_ensemble: students must share one architecture");
  }
  if (inputs.empty()) throw ConfigError("train_ensemble: empty sample set");

  const auto& hyper = config.hyper;
  const int num_students = static_cast<int>(students.size());
  const int n = static_cast<int>(inputs.size());
  const double peer_weight = mutual ? 1.0 / static_cast<double>(num_students - 1) : 0.0;
  const double tau = config.loss.tau;
  const PeerKind peer_kind = config.loss.peer_kind;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(hyper.seed);

  TrainedEnsemble result;
  result.config = config;
  result.history.assign(num_students, TrainHistory{});

  std::vector<double> teacher_sum(num_students), peer_sum(num_students);
  std::vector<int> correct(num_students);
  std::vector<GradientSet> grads;
  for (const auto& s : students) grads.push_back(s.zero_gradients());

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::fill(teacher_sum.begin(), teacher_sum.end(), 0.0);
    std::fill(peer_sum.begin(), peer_sum.end(), 0.0);
    std::fill(correct.begin(), correct.end(), 0);

    for (int start = 0; start < n; start += hyper.batch_size) {
      const int bs = std::min(hyper.batch_size, n - start);
      for (auto& g : grads) g.set_zero();

      for (int i = 0; i < bs; ++i) {
        const int idx = order[start + i];
        const int label = teacher.hard_label(idx);

        // Step 1: forward every student with its current parameters.
        std::vector<MlpNetwork::Trace> traces;
        traces.reserve(num_students);
        std::vector<ProbVector> p_one(num_students), p_tau(num_students);
        for (int k = 0; k < num_students; ++k) {
          traces.push_back(students[k].forward_trace(inputs[idx]));
          const LogitVector& z = traces.back().act.back();
          p_one[k] = softened_softmax(z, 1.0);
          if (mutual && peer_kind == PeerKind::kKL) p_tau[k] = softened_softmax(z, tau);
        }

        // Step 2: per-student gradients against the frozen step-1 predictions.
        for (int k = 0; k < num_students; ++k) {
          const LogitVector& z = traces[k].act.back();
          Vec g = p_one[k];
          g[label] -= 1.0;
          teacher_sum[k] += -std::log(std::max(p_one[k][label], kProbFloor));
          if (argmax_lowest(z) == label) ++correct[k];

          if (mutual) {
            for (int l = 0; l < num_students; ++l) {
              if (l == k) continue;
              Vec pg;
              if (peer_kind == PeerKind::kKL) {
                pg = kl_grad(z, p_tau[l], tau);
                peer_sum[k] += peer_weight * kl_loss(p_tau[k], p_tau[l]);
              } else {
                pg = ce_hard_grad(z, argmax_lowest(p_one[l]));
                peer_sum[k] += peer_weight * ce_hard_loss(p_one[k], p_one[l]);
              }
              for (std::size_t j = 0; j < g.size(); ++j) g[j] += peer_weight * pg[j];
            }
          }
          students[k].backward_into(traces[k], g, grads[k]);
        }
      }

      // Step 3: simultaneous update.
      for (int k = 0; k < num_students; ++k) {
        grads[k].scale(1.0 / bs);
        students[k].sgd_step(grads[k], hyper.learning_rate);
      }
    }

    for (int k = 0; k < num_students; ++k) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.teacher_term = teacher_sum[k] / n;
      rec.peer_term = peer_sum[k] / n;
      rec.mean_loss = rec.teacher_term + rec.peer_term;
      rec.train_accuracy = static_cast<double>(correct[k]) / n;
      result.history[k].push_back(rec);
    }
  }

  result.students = std::move(students);
  return result;
}

TrainedEnsemble mutual_distill(const std::vector<int>& student_dims, const std::vector<Vec>& inputs,
                               const TeacherCache& teacher, const DistillConfig& config) {
  config.validate();
  if (config.num_students < 2)
    throw ConfigError("mutual_distill: requires at least 2 students");
  std::vector<MlpNetwork> students;
  students.reserve(config.num_students);
  for (int k = 0; k < config.num_students; ++k)
    students.emplace_back(student_dims, derive_seed(config.hyper.seed, k));
  return train_ensemble(std::move(students), inputs, teacher, config, /*mutual=*/true);
}

ProbVector ensemble_predict(const std::vector<MlpNetwork>& students, const Vec& input,
                            CombineMode mode) {
  if (students.empty()) throw ConfigError("ensemble_predict: empty ensemble");
  ProbVector combined = softened_softmax(students.front().forward(input), 1.0);
  if (students.size() == 1) return combined;  // both modes: unchanged
  if (mode == CombineMode::kAverage) {
    for (std::size_t k = 1; k < students.size(); ++k) {
      const ProbVector p = softened_softmax(students[k].forward(input), 1.0);
      for (std::size_t j = 0; j < combined.size(); ++j) combined[j] += p[j];
    }
    for (double& x : combined) x /= static_cast<double>(students.size());
  } else {
    for (std::size_t k = 1; k < students.size(); ++k) {
      const ProbVector p = softened_softmax(students[k].forward(input), 1.0);
      for (std::size_t j = 0; j < combined.size(); ++j) combined[j] = std::max(combined[j], p[j]);
    }
    double sum = 0.0;
    for (double x : combined) sum += x;
    for (double& x : combined) x /= sum;  // argmax unaffected
  }
  return combined;
}

double evaluate(const MlpNetwork& net, const std::vector<Vec>& inputs,
                const std::vector<int>& labels) {
  if (inputs.empty()) throw ConfigError("evaluate: empty test set");
  if (inputs.size() != labels.size()) throw ShapeError("evaluate: inputs and labels misaligned");
  int correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (argmax_lowest(net.forward(inputs[i])) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

double evaluate_ensemble(const std::vector<MlpNetwork>& students, CombineMode mode,
                         const std::vector<Vec>& inputs, const std::vector<int>& labels) {
  if (students.empty()) throw ConfigError("evaluate_ensemble: empty ensemble");
  if (inputs.empty()) throw ConfigError("evaluate_ensemble: empty test set");
  if (inputs.size() != labels.size())
    throw ShapeError("evaluate_ensemble: inputs and labels misaligned");
  int correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (argmax_lowest(ensemble_predict(students, inputs[i], mode)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

}  // namespace xmodal
