#include "thermid/sysid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "thermid/error.hpp"

namespace thermid::sysid {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Stage = IdentificationError::Stage;

namespace {

std::atomic<std::uint64_t> g_gain_solves{0};

// Scratch budget for one streamed QR update (R stacked over a chunk of rows).
constexpr double kChunkBudgetBytes = 512.0 * 1024 * 1024;

/// Rows of the transposed block-Hankel data matrix (one row per window start
/// t, covering samples t .. t+2i-1), with i = horizon and m inputs, preceded
/// by a constant column. Column layout, chosen so that both oblique
/// projections below act on leading blocks of the triangular factor:
///   0                    constant 1
///   [1, 1+(i-1)m)        inputs  u(t+k), k = i+1..2i-1
///   [1+(i-1)m, 1+im)     input   u(t+i)
///   [1+im, 1+2im)        inputs  u(t+k), k = 0..i-1
///   [1+2im, 1+2im+i)     outputs y(t+k), k = 0..i-1
///   1+2im+i              output  y(t+i)
///   (1+2im+i, 1+2im+2i)  outputs y(t+k), k = i+1..2i-1
/// Projecting along the constant as well as the future inputs makes the
/// estimate indifferent to the output level.
class HankelRows {
public:
    HankelRows(const MatrixXd& v, const VectorXd& y, Index horizon)
        : v_(v), y_(y), i_(horizon), m_(v.cols()) {}

    Index width() const { return 1 + 2 * i_ * (m_ + 1); }

    /// Writes rows [t0, t0 + count) into dst (count x width).
    template <typename Dst>
    void fill(Index t0, Index count, Dst&& dst) const {
        dst.col(0).setOnes();
        for (Index k = 0; k < 2 * i_; ++k) {
            const Index ucol = input_column(k);
            for (Index ch = 0; ch < m_; ++ch)
                dst.col(ucol + ch) = v_.col(ch).segment(t0 + k, count);
            dst.col(1 + 2 * i_ * m_ + k) = y_.segment(t0 + k, count);
        }
    }

private:
    Index input_column(Index k) const {
        if (k < i_) return 1 + i_ * m_ + k * m_;
        if (k == i_) return 1 + (i_ - 1) * m_;
        return 1 + (k - i_ - 1) * m_;
    }

    const MatrixXd& v_;
    const VectorXd& y_;
    Index i_;
    Index m_;
};

/// Regressor rows for the input gain with A and C fixed. For centered data,
///   y(k) = sum_l C A^(k-1-l) B v(l) + C A^k x0 + c,
/// which is linear in (B, x0, c). Row k holds P(k) (m x n, row-major, so
/// entry j*n + i multiplies B(i, j)), then C A^k, then 1, then y(k). P obeys
/// P(k+1) = P(k) A + v(k) C, so rows must be requested in increasing order.
class OutputErrorRows {
public:
    OutputErrorRows(const MatrixXd& A, const MatrixXd& C, const MatrixXd& v, const VectorXd& y)
        : A_(A), v_(v), y_(y), n_(A.rows()), m_(v.cols()),
          P_(MatrixXd::Zero(v.cols(), A.rows())), h_(C), c_(C) {}

    Index width() const { return n_ * m_ + n_ + 2; }
    Index unknowns() const { return width() - 1; }

    template <typename Dst>
    void fill(Index t0, Index count, Dst&& dst) {
        for (Index r = 0; r < count; ++r) {
            const Index k = t0 + r;
            for (Index jj = 0; jj < m_; ++jj) dst.row(r).segment(jj * n_, n_) = P_.row(jj);
            dst.row(r).segment(n_ * m_, n_) = h_;
            dst(r, n_ * m_ + n_) = 1.0;
            dst(r, n_ * m_ + n_ + 1) = y_(k);
            P_ = P_ * A_;
            P_.noalias() += v_.row(k).transpose() * c_;
            h_ = h_ * A_;
        }
    }

private:
    const MatrixXd& A_;
    const MatrixXd& v_;
    const VectorXd& y_;
    Index n_;
    Index m_;
    MatrixXd P_;
    Eigen::RowVectorXd h_;
    Eigen::RowVectorXd c_;
};

/// Upper-triangular factor of a (rows x width) data matrix produced by
/// `source`, computed by repeatedly factoring [R; next chunk]. Equivalent to
/// one QR of the full matrix up to row signs, without ever holding it in memory.
template <typename Source>
MatrixXd streamed_triangular_factor(Source& source, Index rows, Index chunk) {
    const Index r = source.width();
    MatrixXd work = MatrixXd::Zero(r + chunk, r);
    for (Index t0 = 0; t0 < rows; t0 += chunk) {
        const Index count = std::min(chunk, rows - t0);
        source.fill(t0, count, work.middleRows(r, count));
        Eigen::Ref<MatrixXd> active = work.topRows(r + count);
        Eigen::HouseholderQR<Eigen::Ref<MatrixXd>> qr(active);
        // The factorization overwrote `active`; keep only R on top.
        work.topRows(r).triangularView<Eigen::StrictlyLower>().setZero();
    }
    return work.topRows(r);
}

/// Rank-revealing least-squares factorization; pivots at or below tol * the
/// largest count as zero. (The threshold must be set before factoring.)
Eigen::CompleteOrthogonalDecomposition<MatrixXd> least_squares(const MatrixXd& a, double tol) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
    cod.setThreshold(tol);
    cod.compute(a);
    return cod;
}

/// Oblique projection, in the row coordinates of the lower-triangular factor L,
/// of the rows [target, target + count) along rows [0, along) onto rows
/// [along, onto_end). Requires onto_end <= target, so only the first onto_end
/// coordinates are involved. Returns count x onto_end.
MatrixXd oblique_projection(const MatrixXd& L, Index along, Index onto_end, Index target,
                            Index count, double tolerance) {
    const Index width = onto_end - along;
    // Coefficients on the `onto` rows follow from the trailing coordinates,
    // which the `along` rows do not touch.
    const auto cod = least_squares(L.block(along, along, width, width).transpose(), tolerance);
    const MatrixXd coeff =
        cod.solve(L.block(target, along, count, width).transpose()).transpose();
    return coeff * L.block(along, 0, width, onto_end);
}

Index pick_chunk(Index width, std::size_t requested) {
    if (requested > 0) return static_cast<Index>(requested);
    const double by_budget = kChunkBudgetBytes / (8.0 * static_cast<double>(width)) -
                             static_cast<double>(width);
    const Index c = static_cast<Index>(std::min(4.0 * static_cast<double>(width), by_budget));
    return std::max<Index>(c, 256);
}

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

double spectral_radius_of(const MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    Eigen::EigenSolver<MatrixXd> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Maps every eigenvalue with |lambda| >= 1 to 1/conj(lambda) (modulus capped
/// at kMaxReflectedModulus) by rescaling the matching diagonal block of the
/// real Schur form; the other eigenvalues are unchanged.
constexpr double kMaxReflectedModulus = 0.999;

MatrixXd reflect_into_unit_disc(const MatrixXd& A) {
    Eigen::RealSchur<MatrixXd> schur(A);
    MatrixXd T = schur.matrixT();
    const MatrixXd& U = schur.matrixU();
    const Index n = T.rows();
    for (Index k = 0; k < n;) {
        const bool pair = k + 1 < n && T(k + 1, k) != 0.0;
        const Index size = pair ? 2 : 1;
        double modulus;
        if (pair) {
            const auto blk = T.block(k, k, 2, 2);
            modulus = std::sqrt(std::abs(blk.determinant()));
        } else {
            modulus = std::abs(T(k, k));
        }
        if (modulus >= 1.0) {
            const double target = std::min(1.0 / modulus, kMaxReflectedModulus);
            T.block(k, k, size, size) *= target / modulus;
        }
        k += size;
    }
    return U * T * U.transpose();
}

/// Steady-state predictor gain from the DARE
///   P = A P A' + Q - (A P C' + S)(C P C' + R)^-1 (A P C' + S)'
/// by fixed-point iteration. Returns false if it does not converge.
bool riccati_gain(const MatrixXd& A, const MatrixXd& C, const MatrixXd& Q, double R,
                  const MatrixXd& S, MatrixXd& K) {
    const Index n = A.rows();
    MatrixXd P = Q;
    for (int iter = 0; iter < 20000; ++iter) {
        const MatrixXd APCt = A * P * C.transpose() + S;
        const double innov = (C * P * C.transpose())(0, 0) + R;
        if (!(innov > 0.0) || !std::isfinite(innov)) return false;
        MatrixXd next = A * P * A.transpose() + Q - APCt * APCt.transpose() / innov;
        next = 0.5 * (next + next.transpose());
        if (!all_finite(next)) return false;
        const double change = (next - P).norm();
        P = std::move(next);
        if (change <= 1e-12 * std::max(1.0, P.norm())) {
            const double innov_final = (C * P * C.transpose())(0, 0) + R;
            K = (A * P * C.transpose() + S) / innov_final;
            return K.allFinite() && K.rows() == n;
        }
    }
    return false;
}

} // namespace

double StateSpaceModel::spectral_radius() const { return spectral_radius_of(A); }

void StateSpaceModel::validate() const {
    const Index n = A.rows();
    if (n < 1 || A.cols() != n) throw DataError("model: A must be square with order >= 1");
    if (B.rows() != n) throw DataError("model: B row count must equal the order");
    if (C.rows() != 1 || C.cols() != n) throw DataError("model: C must be 1 x order");
    if (K.rows() != n || K.cols() != 1) throw DataError("model: K must be order x 1");
    if (static_cast<std::size_t>(B.cols()) != spec.size())
        throw DataError("model: B column count must equal the regressor count");
    if (!(sample_rate > 0.0)) throw DataError("model: sample rate must be positive");
}

int default_horizon(int order) {
    return std::max(order + 2, static_cast<int>(std::ceil(1.2 * order)));
}

std::size_t min_samples(int order, int horizon, int inputs) {
    return 2 * static_cast<std::size_t>(horizon) * static_cast<std::size_t>(inputs + 1) +
           static_cast<std::size_t>(order);
}

Identification n4sid_identify(const MatrixXd& v, const VectorXd& y, int order,
                              const N4sidOptions& options) {
    if (order < 1) throw IdentificationError(Stage::input_check, "order must be >= 1");
    const int horizon = options.horizon > 0 ? options.horizon : default_horizon(order);
    if (horizon <= order)
        throw IdentificationError(Stage::input_check, "horizon must exceed the order");
    if (v.rows() != y.size())
        throw IdentificationError(Stage::input_check, "input and output lengths differ");
    if (v.cols() < 1) throw IdentificationError(Stage::input_check, "no input columns");
    const auto need = min_samples(order, horizon, static_cast<int>(v.cols()));
    if (static_cast<std::size_t>(y.size()) < need)
        throw IdentificationError(Stage::input_check,
                                  "need at least " + std::to_string(need) + " samples, got " +
                                      std::to_string(y.size()));
    if (!v.allFinite() || !y.allFinite())
        throw IdentificationError(Stage::input_check, "non-finite values in the data");

    const Index n = order;
    const Index m = v.cols();
    const Index i = horizon;
    const Index N = y.size();
    const Index j = N - 2 * i + 1;

    Identification out;
    StateSpaceModel& model = out.model;
    model.sample_rate = options.sample_rate;

    // Both signals are centered; the input mean is folded back into the
    // output offset once the DC gain is known.
    const Eigen::RowVectorXd v_mean = v.colwise().mean();
    const double y_mean = y.mean();
    const MatrixXd vc = v.rowwise() - v_mean;
    const VectorXd yc = y.array() - y_mean;
    model.output_offset = y_mean;

    // A constant output carries no dynamics to identify.
    if (yc.norm() <= 1e-12 * std::max(1.0, std::abs(y_mean)) * std::sqrt(static_cast<double>(N))) {
        model.A = MatrixXd::Zero(n, n);
        model.B = MatrixXd::Zero(n, m);
        model.C = MatrixXd::Zero(1, n);
        model.K = MatrixXd::Zero(n, 1);
        model.stable = true;
        out.singular_values = VectorXd::Zero(i);
        out.warnings.push_back("output is constant; identified the null system");
        return out;
    }

    HankelRows hankel(vc, yc, i);
    const Index r = hankel.width();
    const MatrixXd R = streamed_triangular_factor(hankel, j, pick_chunk(r, options.chunk_rows));
    if (!all_finite(R))
        throw IdentificationError(Stage::decomposition, "non-finite triangular factor");
    const MatrixXd L = R.transpose();

    // Row offsets in L (see HankelRows).
    const Index future_u = 1 + i * m;          // constant and all future inputs: [0, 1+im)
    const Index past_end = 1 + 2 * i * m + i;  // past inputs and outputs end here
    const Index shifted_u = 1 + (i - 1) * m;   // constant and inputs from u(t+i+1)
    const Index y_now = past_end;              // row of y(t+i)
    const Index w = past_end + 1;              // coordinates in use by every quantity below
    const double tol = options.sv_tolerance;

    // O_i: future outputs projected on the past along future inputs.
    const MatrixXd Oi = oblique_projection(L, future_u, past_end, y_now, i, tol);
    // O_{i-1}: the same one block later; past grows by u(t+i) and y(t+i).
    const MatrixXd Oi1 = oblique_projection(L, shifted_u, w, y_now + 1, i - 1, tol);
    if (!all_finite(Oi) || !all_finite(Oi1))
        throw IdentificationError(Stage::decomposition, "oblique projection is not finite");

    Eigen::BDCSVD<MatrixXd> svd(Oi, Eigen::ComputeThinU);
    out.singular_values = svd.singularValues();
    const VectorXd& sv = out.singular_values;
    if (sv.size() < n)
        throw IdentificationError(Stage::order_selection,
                                  "order " + std::to_string(n) + " exceeds the " +
                                      std::to_string(sv.size()) + " available singular values");
    if (!(sv(n - 1) > tol * sv(0))) {
        const auto significant = (sv.array() > tol * sv(0)).count();
        throw IdentificationError(Stage::order_selection,
                                  "only " + std::to_string(significant) +
                                      " significant singular values for order " +
                                      std::to_string(n) + " (insufficient excitation)");
    }

    // Extended observability matrix and the two state sequences, all in L coordinates.
    const MatrixXd gamma =
        svd.matrixU().leftCols(n) * sv.head(n).cwiseSqrt().asDiagonal(); // i x n
    const MatrixXd gamma_up = gamma.topRows(i - 1);
    MatrixXd X(n, w);
    X.leftCols(past_end) = sv.head(n).cwiseSqrt().cwiseInverse().asDiagonal() *
                           svd.matrixU().leftCols(n).transpose() * Oi;
    X.col(past_end).setZero();
    const MatrixXd X_next = least_squares(gamma_up, tol).solve(Oi1); // n x w

    const MatrixXd U_now = L.block(shifted_u, 0, m, w);
    const MatrixXd Y_now = L.block(y_now, 0, 1, w);
    const MatrixXd ones = L.block(0, 0, 1, w);

    // The states are known up to a constant shift, so both regressions carry
    // an intercept: [X_next] = [A B e] [X; U_now; 1] and Y_now = [C d] [X; 1].
    MatrixXd regressors(w, n + m + 1);
    regressors.leftCols(n) = X.transpose();
    regressors.middleCols(n, m) = U_now.transpose();
    regressors.col(n + m) = ones.transpose();
    const auto reg = least_squares(regressors, tol);
    if (reg.rank() < n + m + 1)
        throw IdentificationError(Stage::regression,
                                  "regression matrix has rank " + std::to_string(reg.rank()) +
                                      " < " + std::to_string(n + m + 1) +
                                      " (insufficient input excitation)");
    const MatrixXd ABe = reg.solve(X_next.transpose()).transpose();
    model.A = ABe.leftCols(n);

    MatrixXd state_regressors(w, n + 1);
    state_regressors.leftCols(n) = X.transpose();
    state_regressors.col(n) = ones.transpose();
    const MatrixXd Cd = least_squares(state_regressors, tol).solve(Y_now.transpose()).transpose();
    model.C = Cd.leftCols(n);
    if (!all_finite(model.A) || !all_finite(model.C))
        throw IdentificationError(Stage::regression, "non-finite system matrices");

    if (spectral_radius_of(model.A) >= 1.0) {
        model.A = reflect_into_unit_disc(model.A);
        out.warnings.push_back("unstable poles of A reflected into the unit disc");
    }

    // B from the input contribution to the output with A and C held fixed,
    // jointly with the initial state and a level correction.
    OutputErrorRows rows(model.A, model.C, vc, yc);
    const Index p = rows.unknowns();
    const MatrixXd Roe = streamed_triangular_factor(rows, N, pick_chunk(p + 1, options.chunk_rows));
    const VectorXd theta =
        least_squares(Roe.topLeftCorner(p, p), tol).solve(Roe.col(p).head(p));
    model.B.resize(n, m);
    for (Index c = 0; c < m; ++c) model.B.col(c) = theta.segment(c * n, n);
    model.output_offset = y_mean + theta(p - 1);
    if (!all_finite(model.B) || !std::isfinite(model.output_offset))
        throw IdentificationError(Stage::regression, "non-finite input matrix");

    // Residual covariances; L = R' with orthonormal Q, so sums over the data
    // columns reduce to products in L coordinates.
    const MatrixXd W = X_next - model.A * X - model.B * U_now - ABe.col(n + m) * ones;
    const MatrixXd E = Y_now - model.C * X - Cd(0, n) * ones;
    const double cols = static_cast<double>(j);
    const MatrixXd Q = W * W.transpose() / cols;
    const MatrixXd S = W * E.transpose() / cols;
    const double Rv = E.squaredNorm() / cols;

    model.K = MatrixXd::Zero(n, 1);
    MatrixXd K;
    if (Rv > 0.0 && riccati_gain(model.A, model.C, Q, Rv, S, K)) {
        model.K = K;
    } else {
        out.warnings.push_back("Riccati solve for the Kalman gain failed; using K = 0");
    }

    model.stable = model.spectral_radius() < 1.0;
    if (model.stable) {
        // Undo the input centering: y - y_mean = G (v - v_mean) in steady state.
        const MatrixXd I_minus_A = MatrixXd::Identity(n, n) - model.A;
        const VectorXd z = I_minus_A.transpose().partialPivLu().solve(model.C.transpose());
        model.output_offset -= (z.transpose() * model.B).dot(v_mean);
    } else {
        out.warnings.push_back("identified A is not stable");
    }
    return out;
}

namespace {

void check_inputs(const StateSpaceModel& model, const MatrixXd& v) {
    if (v.cols() != model.B.cols())
        throw DataError("input has " + std::to_string(v.cols()) + " columns, model expects " +
                        std::to_string(model.B.cols()));
}

} // namespace

VectorXd simulate(const StateSpaceModel& model, const MatrixXd& v) {
    return simulate(model, v, VectorXd::Zero(model.order()));
}

VectorXd simulate(const StateSpaceModel& model, const MatrixXd& v, const VectorXd& x0) {
    check_inputs(model, v);
    if (x0.size() != model.order()) throw DataError("initial state has the wrong dimension");
    const Index N = v.rows();
    const MatrixXd drive = model.B * v.transpose(); // n x N
    VectorXd x = x0;
    VectorXd next(x.size());
    VectorXd yhat(N);
    const Eigen::RowVectorXd c = model.C.row(0);
    for (Index k = 0; k < N; ++k) {
        yhat(k) = c.dot(x) + model.output_offset;
        next.noalias() = model.A * x;
        x = next + drive.col(k);
    }
    return yhat;
}

VectorXd steady_state_state(const StateSpaceModel& model, const VectorXd& v) {
    const Index n = model.order();
    if (!model.stable) return VectorXd::Zero(n);
    const MatrixXd I_minus_A = MatrixXd::Identity(n, n) - model.A;
    return I_minus_A.partialPivLu().solve(model.B * v);
}

VectorXd predict_one_step(const StateSpaceModel& model, const MatrixXd& v, const VectorXd& y) {
    check_inputs(model, v);
    if (y.size() != v.rows()) throw DataError("predict_one_step: output length mismatch");
    const Index N = v.rows();
    const MatrixXd A_pred = model.A - model.K * model.C;
    const MatrixXd drive = model.B * v.transpose();
    VectorXd x = VectorXd::Zero(model.order());
    VectorXd next(x.size());
    VectorXd yhat(N);
    const Eigen::RowVectorXd c = model.C.row(0);
    for (Index k = 0; k < N; ++k) {
        yhat(k) = c.dot(x) + model.output_offset;
        next.noalias() = A_pred * x;
        x = next + drive.col(k) + model.K.col(0) * (y(k) - model.output_offset);
    }
    return yhat;
}

double mse(const VectorXd& predicted, const VectorXd& measured, std::size_t discard) {
    if (predicted.size() != measured.size()) throw DataError("mse: length mismatch");
    const auto n = static_cast<std::size_t>(measured.size());
    if (discard >= n) throw DataError("mse: nothing left after discarding the burn-in");
    const auto start = static_cast<Index>(discard);
    const auto count = static_cast<Index>(n - discard);
    return (predicted.segment(start, count) - measured.segment(start, count)).squaredNorm() /
           static_cast<double>(count);
}

double nrmse_fit(const VectorXd& predicted, const VectorXd& measured) {
    if (predicted.size() != measured.size() || measured.size() == 0)
        throw DataError("nrmse_fit: length mismatch");
    const double spread = (measured.array() - measured.mean()).matrix().norm();
    if (spread == 0.0) throw DataError("nrmse_fit: measured signal is constant");
    return 100.0 * (1.0 - (measured - predicted).norm() / spread);
}

Eigen::RowVectorXd steady_state_gain(const StateSpaceModel& model) {
    const Index n = model.order();
    if (!(model.spectral_radius() < 1.0 - 1e-9))
        throw DataError("steady_state_gain: model is not stable (spectral radius >= 1)");
    ++g_gain_solves;
    const MatrixXd I_minus_A = MatrixXd::Identity(n, n) - model.A;
    // g = C (I - A)^-1 B, computed as ((I - A)^-T C^T)^T B.
    const VectorXd z = I_minus_A.transpose().partialPivLu().solve(model.C.transpose());
    return z.transpose() * model.B;
}

std::uint64_t gain_solve_count() noexcept { return g_gain_solves.load(); }

} // namespace thermid::sysid
