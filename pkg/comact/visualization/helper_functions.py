"""
This module contains several low level axis styling functions used by the plotting module.
"""
from matplotlib.ticker import FuncFormatter, LinearLocator


def disable_top_right_axis(ax):
    for loc, spine in ax.spines.items():
        if loc in ['right', 'top']:
            spine.set_color('none')
    ax.xaxis.tick_bottom()
    ax.yaxis.tick_left()


def disable_axis(ax):
    for spine in ax.spines.values():
        spine.set_color('none')
    ax.set_xticks([])
    ax.set_yticks([])


def _short(x, pos):
    s_g = '%.4g' % x
    s_f = '%.4f' % x
    return s_f if len(s_f) < len(s_g) else s_g


def three_tick_axis(axis):
    axis.set_major_locator(LinearLocator(3))
    axis.set_major_formatter(FuncFormatter(_short))
