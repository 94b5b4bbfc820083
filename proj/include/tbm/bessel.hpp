#pragma once

namespace tbm {

/// log I_n(x) for integer order n >= 0 and x >= 0, stable across the whole
/// range used by the demapper (orders up to a few thousand, arguments from
/// ~1e-300 to ~1e9). Power series for small arguments, Hankel / Olver
/// asymptotics for large argument or order, normalized downward recurrence
/// in between.
double log_bessel_i(int n, double x);

}  // namespace tbm
