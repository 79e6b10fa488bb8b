#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>

#include "slotlifter/tensor.hpp"

// Reverse-mode automatic differentiation over dense tensors. Nodes own their
// value and (lazily allocated) gradient; a backward closure scatters the
// incoming gradient to the parents. Graphs are rebuilt every forward pass,
// leaves (parameters) persist across passes.
namespace sl::ad {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  std::function<void(Node<T>&)> backfn;

  void ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor<T>::zeros(value.shape);
  }
  void zero_grad() { grad = Tensor<T>(); }
};

template <typename T>
Var<T> constant(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  return n;
}

template <typename T>
Var<T> leaf(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  return constant(x->value);
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backfn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backfn = std::move(backfn);
  return n;
}

template <typename T>
void topo_order(const Var<T>& root, std::vector<Node<T>*>& order) {
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (!seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

// Backpropagate from a scalar root. Gradients accumulate into node->grad;
// parameter leaves must be zeroed by the caller between steps.
template <typename T>
void backward(const Var<T>& root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  std::vector<Node<T>*> order;
  topo_order(root, order);
  root->ensure_grad();
  root->grad.data[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->requires_grad && n->backfn && n->grad.shape == n->value.shape)
      n->backfn(*n);
  }
}

// ---- Eigen helpers --------------------------------------------------------

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<EMat<T>>;
template <typename T>
using CMap = Eigen::Map<const EMat<T>>;

template <typename T>
CMap<T> mat(const Tensor<T>& t, long r, long c) {
  return CMap<T>(t.data.data(), r, c);
}
template <typename T>
Map<T> mat(Tensor<T>& t, long r, long c) {
  return Map<T>(t.data.data(), r, c);
}

// ---- elementwise ----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  assert(a->value.same_shape(b->value));
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = n.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  assert(a->value.same_shape(b->value));
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  assert(a->value.same_shape(b->value));
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node<T>(std::move(out), {a, b}, [](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  Tensor<T> out = a->value;
  for (auto& x : out.data) x = -x;
  return make_node<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i) p->grad[i] -= n.grad[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a->value;
  for (auto& x : out.data) x *= s;
  return make_node<T>(std::move(out), {a}, [s](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i] * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out = a->value;
  for (auto& x : out.data) x += s;
  return make_node<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
  });
}

// Elementwise product with a non-differentiable tensor of the same shape.
template <typename T>
Var<T> mul_const(const Var<T>& a, Tensor<T> c) {
  assert(a->value.same_shape(c));
  Tensor<T> out = a->value;
  for (long i = 0; i < out.size(); ++i) out[i] *= c[i];
  auto cc = std::make_shared<Tensor<T>>(std::move(c));
  return make_node<T>(std::move(out), {a}, [cc](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i] * (*cc)[i];
  });
}

// x * s where s is a differentiable scalar variable of shape {1}.
template <typename T>
Var<T> mul_scalar_var(const Var<T>& a, const Var<T>& s) {
  assert(s->value.size() == 1);
  T sv = s->value[0];
  Tensor<T> out = a->value;
  for (auto& x : out.data) x *= sv;
  return make_node<T>(std::move(out), {a, s}, [sv](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& ps = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * sv;
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      T acc = T(0);
      for (long i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * pa->value[i];
      ps->grad[0] += acc;
    }
  });
}

template <typename T, typename F, typename DF>
Var<T> unary_op(const Var<T>& a, F f, DF df) {
  Tensor<T> out = a->value;
  for (auto& x : out.data) x = f(x);
  return make_node<T>(std::move(out), {a}, [df](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i)
      p->grad[i] += n.grad[i] * df(p->value[i], n.value[i]);
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}
template <typename T>
Var<T> exp_(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}
template <typename T>
Var<T> log_(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}
template <typename T>
Var<T> sigmoid_(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}
template <typename T>
Var<T> tanh_(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

// ---- matrix products ------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  long M = a->value.rows(), K = a->value.last_dim();
  long K2 = b->value.shape.size() >= 2 ? b->value.shape[b->value.shape.size() - 2]
                                       : b->value.rows();
  long N = b->value.last_dim();
  assert(K == K2 && b->value.size() == K * N);
  (void)K2;
  Tensor<T> out({M, N});
  mat(out, M, N).noalias() = mat(a->value, M, K) * mat(b->value, K, N);
  return make_node<T>(std::move(out), {a, b}, [M, K, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    auto g = mat(n.grad, M, N);
    if (pa->requires_grad) {
      pa->ensure_grad();
      mat(pa->grad, M, K).noalias() += g * mat(pb->value, K, N).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      mat(pb->grad, K, N).noalias() += mat(pa->value, M, K).transpose() * g;
    }
  });
}

// a [M,K] x b[N,K]^T -> [M,N]
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  long M = a->value.rows(), K = a->value.last_dim();
  long N = b->value.rows();
  assert(b->value.last_dim() == K);
  Tensor<T> out({M, N});
  mat(out, M, N).noalias() = mat(a->value, M, K) * mat(b->value, N, K).transpose();
  return make_node<T>(std::move(out), {a, b}, [M, K, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    auto g = mat(n.grad, M, N);
    if (pa->requires_grad) {
      pa->ensure_grad();
      mat(pa->grad, M, K).noalias() += g * mat(pb->value, N, K);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      mat(pb->grad, N, K).noalias() += g.transpose() * mat(pa->value, M, K);
    }
  });
}

// a [N,K]^T x b [N,D] -> [K,D]
template <typename T>
Var<T> matmul_tn(const Var<T>& a, const Var<T>& b) {
  long N = a->value.rows(), K = a->value.last_dim();
  long D = b->value.last_dim();
  assert(b->value.rows() == N);
  Tensor<T> out({K, D});
  mat(out, K, D).noalias() = mat(a->value, N, K).transpose() * mat(b->value, N, D);
  return make_node<T>(std::move(out), {a, b}, [N, K, D](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    auto g = mat(n.grad, K, D);
    if (pa->requires_grad) {
      pa->ensure_grad();
      mat(pa->grad, N, K).noalias() += mat(pb->value, N, D) * g.transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      mat(pb->grad, N, D).noalias() += mat(pa->value, N, K) * g;
    }
  });
}

// Batched: a [B,M,K] x b [B,K,N] -> [B,M,N]
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b) {
  long B = a->value.shape[0], M = a->value.shape[1], K = a->value.shape[2];
  long N = b->value.shape[2];
  assert(b->value.shape[0] == B && b->value.shape[1] == K);
  Tensor<T> out({B, M, N});
  for (long i = 0; i < B; ++i) {
    CMap<T> ai(a->value.data.data() + i * M * K, M, K);
    CMap<T> bi(b->value.data.data() + i * K * N, K, N);
    Map<T> oi(out.data.data() + i * M * N, M, N);
    oi.noalias() = ai * bi;
  }
  return make_node<T>(std::move(out), {a, b}, [B, M, K, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) pa->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    for (long i = 0; i < B; ++i) {
      CMap<T> g(n.grad.data.data() + i * M * N, M, N);
      CMap<T> ai(pa->value.data.data() + i * M * K, M, K);
      CMap<T> bi(pb->value.data.data() + i * K * N, K, N);
      if (pa->requires_grad) {
        Map<T> ga(pa->grad.data.data() + i * M * K, M, K);
        ga.noalias() += g * bi.transpose();
      }
      if (pb->requires_grad) {
        Map<T> gb(pb->grad.data.data() + i * K * N, K, N);
        gb.noalias() += ai.transpose() * g;
      }
    }
  });
}

// Batched: a [B,M,K] x b [B,N,K]^T -> [B,M,N]
template <typename T>
Var<T> bmm_nt(const Var<T>& a, const Var<T>& b) {
  long B = a->value.shape[0], M = a->value.shape[1], K = a->value.shape[2];
  long N = b->value.shape[1];
  assert(b->value.shape[0] == B && b->value.shape[2] == K);
  Tensor<T> out({B, M, N});
  for (long i = 0; i < B; ++i) {
    CMap<T> ai(a->value.data.data() + i * M * K, M, K);
    CMap<T> bi(b->value.data.data() + i * N * K, N, K);
    Map<T> oi(out.data.data() + i * M * N, M, N);
    oi.noalias() = ai * bi.transpose();
  }
  return make_node<T>(std::move(out), {a, b}, [B, M, K, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) pa->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    for (long i = 0; i < B; ++i) {
      CMap<T> g(n.grad.data.data() + i * M * N, M, N);
      CMap<T> ai(pa->value.data.data() + i * M * K, M, K);
      CMap<T> bi(pb->value.data.data() + i * N * K, N, K);
      if (pa->requires_grad) {
        Map<T> ga(pa->grad.data.data() + i * M * K, M, K);
        ga.noalias() += g * bi;
      }
      if (pb->requires_grad) {
        Map<T> gb(pb->grad.data.data() + i * N * K, N, K);
        gb.noalias() += g.transpose() * ai;
      }
    }
  });
}

// ---- broadcast / reductions ----------------------------------------------

// a [M,N] + b [N] broadcast over rows.
template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& b) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  assert(b->value.size() == N);
  Tensor<T> out = a->value;
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < N; ++c) out[r * N + c] += b->value[c];
  return make_node<T>(std::move(out), {a, b}, [M, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < N; ++c) pb->grad[c] += n.grad[r * N + c];
    }
  });
}

// a [M,N] * g [N] broadcast over rows (differentiable in both).
template <typename T>
Var<T> mul_bias(const Var<T>& a, const Var<T>& b) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  assert(b->value.size() == N);
  Tensor<T> out = a->value;
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < N; ++c) out[r * N + c] *= b->value[c];
  return make_node<T>(std::move(out), {a, b}, [M, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < N; ++c) pa->grad[r * N + c] += n.grad[r * N + c] * pb->value[c];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < N; ++c) pb->grad[c] += n.grad[r * N + c] * pa->value[r * N + c];
    }
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T s = T(0);
  for (const T& x : a->value.data) s += x;
  return make_node<T>(Tensor<T>::scalar(s), {a}, [](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    T g = n.grad[0];
    for (long i = 0; i < p->grad.size(); ++i) p->grad[i] += g;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a->value.size()));
}

// [M,N] -> [M,1] sum over the last dimension.
template <typename T>
Var<T> sum_cols(const Var<T>& a) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  Tensor<T> out({M, 1});
  for (long r = 0; r < M; ++r) {
    T s = T(0);
    for (long c = 0; c < N; ++c) s += a->value[r * N + c];
    out[r] = s;
  }
  return make_node<T>(std::move(out), {a}, [M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r)
      for (long c = 0; c < N; ++c) p->grad[r * N + c] += n.grad[r];
  });
}

// [B,M,D] -> [B,D] sum over the middle dimension.
template <typename T>
Var<T> sum_mid(const Var<T>& a) {
  assert(a->value.shape.size() == 3);
  long B = a->value.shape[0], M = a->value.shape[1], D = a->value.shape[2];
  Tensor<T> out({B, D});
  for (long b = 0; b < B; ++b)
    for (long m = 0; m < M; ++m)
      for (long d = 0; d < D; ++d) out[b * D + d] += a->value[(b * M + m) * D + d];
  return make_node<T>(std::move(out), {a}, [B, M, D](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long b = 0; b < B; ++b)
      for (long m = 0; m < M; ++m)
        for (long d = 0; d < D; ++d)
          p->grad[(b * M + m) * D + d] += n.grad[b * D + d];
  });
}

// [M,1] -> [M,N] replicate columns.
template <typename T>
Var<T> expand_cols(const Var<T>& a, long N) {
  long M = a->value.rows();
  assert(a->value.last_dim() == 1);
  Tensor<T> out({M, N});
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < N; ++c) out[r * N + c] = a->value[r];
  return make_node<T>(std::move(out), {a}, [M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r) {
      T s = T(0);
      for (long c = 0; c < N; ++c) s += n.grad[r * N + c];
      p->grad[r] += s;
    }
  });
}

// ---- shape ops ------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<long> s) {
  assert(Tensor<T>::count(s) == a->value.size());
  Tensor<T> out(std::move(s), a->value.data);
  return make_node<T>(std::move(out), {a}, [](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
  });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  long M = a->value.rows();
  long Na = a->value.last_dim(), Nb = b->value.last_dim();
  assert(b->value.rows() == M);
  Tensor<T> out({M, Na + Nb});
  for (long r = 0; r < M; ++r) {
    for (long c = 0; c < Na; ++c) out[r * (Na + Nb) + c] = a->value[r * Na + c];
    for (long c = 0; c < Nb; ++c) out[r * (Na + Nb) + Na + c] = b->value[r * Nb + c];
  }
  return make_node<T>(std::move(out), {a, b}, [M, Na, Nb](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < Na; ++c) pa->grad[r * Na + c] += n.grad[r * (Na + Nb) + c];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < Nb; ++c)
          pb->grad[r * Nb + c] += n.grad[r * (Na + Nb) + Na + c];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, long start, long len) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  assert(start >= 0 && start + len <= N);
  Tensor<T> out({M, len});
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < len; ++c) out[r * len + c] = a->value[r * N + start + c];
  return make_node<T>(std::move(out), {a}, [M, N, start, len](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r)
      for (long c = 0; c < len; ++c) p->grad[r * N + start + c] += n.grad[r * len + c];
  });
}

// Row gather: idx < 0 yields a zero row (used for padding). Gradient is a
// scatter-add into the source rows.
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<long> idx) {
  long N = a->value.last_dim();
  long M = static_cast<long>(idx.size());
  Tensor<T> out({M, N});
  for (long r = 0; r < M; ++r) {
    long s = idx[r];
    if (s < 0) continue;
    std::copy_n(a->value.data.data() + s * N, N, out.data.data() + r * N);
  }
  auto ix = std::make_shared<std::vector<long>>(std::move(idx));
  return make_node<T>(std::move(out), {a}, [ix, M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r) {
      long s = (*ix)[r];
      if (s < 0) continue;
      for (long c = 0; c < N; ++c) p->grad[s * N + c] += n.grad[r * N + c];
    }
  });
}

// Per-row scale by a non-differentiable weight vector [M].
template <typename T>
Var<T> scale_rows(const Var<T>& a, Tensor<T> w) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  assert(w.size() == M);
  Tensor<T> out = a->value;
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < N; ++c) out[r * N + c] *= w[r];
  auto ww = std::make_shared<Tensor<T>>(std::move(w));
  return make_node<T>(std::move(out), {a}, [ww, M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r)
      for (long c = 0; c < N; ++c) p->grad[r * N + c] += n.grad[r * N + c] * (*ww)[r];
  });
}

// Stack along the row axis: a [Ma,N] over b [Mb,N] -> [Ma+Mb,N].
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  long N = a->value.last_dim();
  long Ma = a->value.rows(), Mb = b->value.rows();
  assert(b->value.last_dim() == N);
  Tensor<T> out({Ma + Mb, N});
  std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
  std::copy(b->value.data.begin(), b->value.data.end(), out.data.begin() + Ma * N);
  return make_node<T>(std::move(out), {a, b}, [Ma, Mb, N](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (long i = 0; i < Ma * N; ++i) pa->grad[i] += n.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (long i = 0; i < Mb * N; ++i) pb->grad[i] += n.grad[Ma * N + i];
    }
  });
}

// Normalize each column to unit sum: y_{n,k} = x_{n,k} / sum_m x_{m,k}.
template <typename T>
Var<T> normalize_cols(const Var<T>& a, T eps = T(1e-12)) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  Tensor<T> out = a->value;
  Tensor<T> inv({N});
  for (long c = 0; c < N; ++c) {
    T s = T(0);
    for (long r = 0; r < M; ++r) s += out[r * N + c];
    inv[c] = T(1) / (s + eps);
  }
  for (long r = 0; r < M; ++r)
    for (long c = 0; c < N; ++c) out[r * N + c] *= inv[c];
  auto inv_p = std::make_shared<Tensor<T>>(std::move(inv));
  return make_node<T>(std::move(out), {a}, [M, N, inv_p](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long c = 0; c < N; ++c) {
      T dot = T(0);
      for (long r = 0; r < M; ++r) dot += n.grad[r * N + c] * n.value[r * N + c];
      T is = (*inv_p)[c];
      for (long r = 0; r < M; ++r)
        p->grad[r * N + c] += is * (n.grad[r * N + c] - dot);
    }
  });
}

// ---- row-structured nonlinearities ---------------------------------------

// Softmax over the last dimension.
template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  Tensor<T> out = a->value;
  for (long r = 0; r < M; ++r) {
    T* row = out.data.data() + r * N;
    T mx = row[0];
    for (long c = 1; c < N; ++c) mx = std::max(mx, row[c]);
    T s = T(0);
    for (long c = 0; c < N; ++c) {
      row[c] = std::exp(row[c] - mx);
      s += row[c];
    }
    for (long c = 0; c < N; ++c) row[c] /= s;
  }
  return make_node<T>(std::move(out), {a}, [M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r) {
      const T* y = n.value.data.data() + r * N;
      const T* g = n.grad.data.data() + r * N;
      T dot = T(0);
      for (long c = 0; c < N; ++c) dot += y[c] * g[c];
      for (long c = 0; c < N; ++c) p->grad[r * N + c] += y[c] * (g[c] - dot);
    }
  });
}

// LayerNorm (no affine) over the last dimension.
template <typename T>
Var<T> layer_norm_rows(const Var<T>& a, T eps = T(1e-5)) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  Tensor<T> out = a->value;
  Tensor<T> istd({M});
  for (long r = 0; r < M; ++r) {
    T* row = out.data.data() + r * N;
    T mu = T(0);
    for (long c = 0; c < N; ++c) mu += row[c];
    mu /= static_cast<T>(N);
    T var = T(0);
    for (long c = 0; c < N; ++c) {
      row[c] -= mu;
      var += row[c] * row[c];
    }
    var /= static_cast<T>(N);
    T is = T(1) / std::sqrt(var + eps);
    istd[r] = is;
    for (long c = 0; c < N; ++c) row[c] *= is;
  }
  auto istd_p = std::make_shared<Tensor<T>>(std::move(istd));
  return make_node<T>(std::move(out), {a}, [M, N, istd_p](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r) {
      const T* y = n.value.data.data() + r * N;
      const T* g = n.grad.data.data() + r * N;
      T gmean = T(0), gydot = T(0);
      for (long c = 0; c < N; ++c) {
        gmean += g[c];
        gydot += g[c] * y[c];
      }
      gmean /= static_cast<T>(N);
      gydot /= static_cast<T>(N);
      T is = (*istd_p)[r];
      for (long c = 0; c < N; ++c)
        p->grad[r * N + c] += is * (g[c] - gmean - y[c] * gydot);
    }
  });
}

// Exclusive cumulative sum along the last dimension.
template <typename T>
Var<T> cumsum_cols_exclusive(const Var<T>& a) {
  long N = a->value.last_dim();
  long M = a->value.rows();
  Tensor<T> out(a->value.shape);
  for (long r = 0; r < M; ++r) {
    T acc = T(0);
    for (long c = 0; c < N; ++c) {
      out[r * N + c] = acc;
      acc += a->value[r * N + c];
    }
  }
  return make_node<T>(std::move(out), {a}, [M, N](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (long r = 0; r < M; ++r) {
      // dx_j = sum_{c > j} g_c
      T acc = T(0);
      for (long c = N - 1; c >= 0; --c) {
        p->grad[r * N + c] += acc;
        acc += n.grad[r * N + c];
      }
    }
  });
}

}  // namespace sl::ad
