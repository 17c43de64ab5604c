#pragma once

// Reference figures reported for the original 89-month dataset, which is not
// public. They document scale; only the regression row is self-consistent
// enough to check (r, n and p tie together through the t distribution).
namespace crisk::reference {

inline constexpr double kMasterIsm = 17.14;
inline constexpr double kMasterNormEp = 99.86;

inline constexpr int kLag8 = 8;
inline constexpr double kLag8MeanIsm = 7.166;
inline constexpr double kLag8MeanNormEp = 89.8;

inline constexpr int kNoVarSet = 7;
inline constexpr double kNoVarSetMeanIsm = 5.24;
inline constexpr double kNoVarSetMeanNormEp = 61.8;

// Spread regressed on the lagged VaR over 89 months.
inline constexpr double kRegressionSlope = -9.553796992;
inline constexpr double kRegressionIntercept = 1812.603769;
inline constexpr double kRegressionR = 0.300004154;
inline constexpr double kRegressionR2 = 0.090002492;
inline constexpr double kRegressionP = 0.004285703;
inline constexpr int kRegressionN = 89;

// VaR window search: the chosen window and its backtest.
inline constexpr int kBestWindow = 65;
inline constexpr int kBestWindowOutliers = 5;
inline constexpr double kBestWindowEam = 130.49;

// Smoothing search: the chosen beta and its backtest.
inline constexpr double kBestBeta = 0.1;
inline constexpr int kBestBetaOutliers = 56;
inline constexpr double kBestBetaEam = 48.23;

}  // namespace crisk::reference
