#pragma once

#include "sharpseg/graph.hpp"

namespace sharpseg {

/// Linear state-space system x' = A x + B u, y = C x + D u with noise terms
/// fixed at zero. A is either [S, S] or a diagonal given as [S].
struct SSMParams {
  Var A;   // [S, S] or [S]
  Var B;   // [S, n_in]
  Var C;   // [n_out, S]
  Var D;   // [n_out, n_in]
  Var x0;  // [S]
};

struct ScanResult {
  Var states;   // [T, S]; row t is the state after consuming u_t
  Var outputs;  // [T, n_out]; row t observes the state entering step t
};

/// Unrolled recurrence over u [T, n_in]. DimMismatch on inconsistent
/// shapes; Overflow as soon as a state entry stops being finite.
ScanResult ssm_scan(const SSMParams& params, Var u);

/// softmax(Q K^T / sqrt(d_k)) V with Q, K [T, d_k] and V [T, d_v].
Var selective_attention(Var q, Var k, Var v);

/// Batched per-channel diagonal scan used inside the Mamba block.
///   u: [N, T, E] inputs, a: [E, S] decay in (0, 1), d: [E] feedthrough.
///   b, c: either [E, S] (static) or [N, T, S] (input dependent, shared by
///   all channels of a timestep).
/// Per channel e: h_{t+1} = a_e * h_t + b_t u_t, y_t = <c_t, h_t> + d_e u_t,
/// with h_0 = 0. Output [N, T, E].
Var channel_scan(Var u, Var a, Var b, Var c, Var d);

}  // namespace sharpseg
