"""Choosing the number of k-means clusters with an effective-df BIC."""

from .core import KMeansFit, FitSeries, best_of_inits, fit_series, lloyd_fit, standardize
from .edf import df_curve, df_vs_kprime_curve, excess_df, total_df
from .evaluate import adjusted_rand_index, ideal_selection, rand_index
from .selection import METHODS, SelectionConfig, select_all
from .simulate import MixtureSpec, generate, run_scenario

__version__ = "0.1.0"

__all__ = [
    "KMeansFit", "FitSeries", "best_of_inits", "fit_series", "lloyd_fit", "standardize",
    "df_curve", "df_vs_kprime_curve", "excess_df", "total_df",
    "adjusted_rand_index", "ideal_selection", "rand_index",
    "METHODS", "SelectionConfig", "select_all",
    "MixtureSpec", "generate", "run_scenario",
]
