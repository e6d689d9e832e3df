"""
This module defines the :class:`.Plotting` API and the plots comact renders from a run directory.

Each class derived from `Plotting` implements `subplot(subplotspec)`, drawing into the region of the
figure it is given; `plot()` creates the figure, calls `subplot` and saves the figure into the
`plots` directory of the run.

    EmbeddingProjectionPlot  - t-SNE projection of exported final context embeddings, coloured by class
    LossCurvePlot            - training loss history
    FewShotCurvePlot         - few-shot mAP as a function of k, one line per modality

:func:`.plot_attention_grid` renders exported attention maps next to the video blocks.
"""

import os
import time
import numpy
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import matplotlib.gridspec as gridspec
from sklearn.manifold import TSNE
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject
from comact.tools.comact_parametrized import colapse_to_dictionary
from comact.analysis.exports import read_embeddings
from comact.analysis.metrics import projection_silhouette
from comact.visualization.helper_functions import disable_top_right_axis, disable_axis, three_tick_axis

logger = comact.getComactLogger()


class Plotting(ParametrizedObject):
    """
    The high level plotting API.

    Parameters
    ----------
    datastore : RunDataStore
              The run from which to plot the data.
    parameters : ParameterSet
               The plot parameters.
    plot_file_name : str
                   File name under <run>/plots; None only draws the figure.
    fig_param : dict
              Passed to the matplotlib figure command.
    """

    def __init__(self, datastore, parameters, plot_file_name=None, fig_param=None):
        ParametrizedObject.__init__(self, parameters)
        self.datastore = datastore
        self.plot_file_name = plot_file_name
        self.fig_param = fig_param if fig_param is not None else {}

    def subplot(self, subplotspec):
        raise NotImplementedError

    def plot(self):
        """
        Draws the figure and saves it. Returns the path of the saved file (None if not saved).
        """
        t1 = time.time()
        self.fig = plt.figure(facecolor='w', **self.fig_param)
        gs = gridspec.GridSpec(1, 1)
        gs.update(left=0.1, right=0.95, top=0.92, bottom=0.1)
        self.subplot(gs[0, 0])
        path = None
        if self.plot_file_name:
            path = self.datastore.path('plots', self.plot_file_name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            self.fig.savefig(path)
        plt.close(self.fig)
        logger.info(self.__class__.__name__ + ' plotting took: %.2f seconds' % (time.time() - t1))
        return path


class EmbeddingProjectionPlot(Plotting):
    """
    Other parameters
    ----------------
    embeddings : str
               An embeddings TSV file (see :func:`comact.analysis.exports.export_embeddings`).
    perplexity : float
               t-SNE perplexity (capped below the number of rows).
    seed : int
    """

    required_parameters = ParameterSet({
        'embeddings': str,
        'perplexity': float,
        'seed': int,
    })

    def project(self):
        _, classes, vectors = read_embeddings(self.parameters.embeddings)
        if len(vectors) < 3:
            raise ValueError("A projection needs at least 3 embeddings, %s has %d" % (self.parameters.embeddings, len(vectors)))
        perplexity = min(self.parameters.perplexity, len(vectors) - 1.0)
        xy = TSNE(n_components=2, perplexity=perplexity, init='pca', random_state=self.parameters.seed).fit_transform(vectors)
        return xy, classes

    def subplot(self, subplotspec):
        xy, classes = self.project()
        ax = plt.subplot(subplotspec)
        scatter = ax.scatter(xy[:, 0], xy[:, 1], c=classes, cmap='tab20', s=12)
        ax.legend(*scatter.legend_elements(), title='activity', fontsize='x-small', loc='best')
        title = os.path.basename(self.parameters.embeddings)
        if 2 <= len(numpy.unique(classes)) < len(classes):
            self.silhouette = projection_silhouette(xy, classes)
            logger.info('Silhouette of %s: %.3f' % (title, self.silhouette))
            title += ' (silhouette %.2f)' % self.silhouette
        ax.set_title(title, fontsize='small')
        disable_top_right_axis(ax)


class LossCurvePlot(Plotting):
    """
    Plots the `loss` of every history record against its step, one line per phase.
    """

    required_parameters = ParameterSet({})

    def subplot(self, subplotspec):
        history = self.datastore.read_history()
        ax = plt.subplot(subplotspec)
        for phase in sorted(set(r['phase'] for r in history)):
            records = [r for r in history if r['phase'] == phase]
            ax.plot([r['step'] for r in records], [r['loss'] for r in records], label=phase)
        ax.set_xlabel('step')
        ax.set_ylabel('loss')
        ax.legend(fontsize='small')
        three_tick_axis(ax.yaxis)
        disable_top_right_axis(ax)


class FewShotCurvePlot(Plotting):
    """
    Few-shot mAP against k from the :class:`.FewShotResult` objects of the run.
    """

    required_parameters = ParameterSet({})

    def subplot(self, subplotspec):
        ax = plt.subplot(subplotspec)
        results = self.datastore.get_analysis_result(identifier='FewShotResult')
        for modality in sorted(set(r.modality for r in results)):
            of_modality = [r for r in results if r.modality == modality and r.map is not None]
            if not of_modality:
                continue
            curves = colapse_to_dictionary([r.map for r in of_modality], of_modality, 'k')
            for key, (ks, maps) in curves.items():
                order = numpy.argsort(ks)
                ax.plot(numpy.array(ks)[order], numpy.array(maps)[order], marker='o', label=modality)
        ax.set_xlabel('k (examples per novel class)')
        ax.set_ylabel('mAP')
        ax.legend(fontsize='small')
        disable_top_right_axis(ax)


def plot_attention_grid(maps, blocks, path, title=None):
    """
    Two rows: the middle frame of every block and its attention map (white is higher importance).

    Parameters
    ----------
    maps : ndarray
         N x H' x W' attention maps.
    blocks : ndarray
           N x K x H x W x 3 video blocks in [0, 1].
    """
    n = maps.shape[0]
    fig = plt.figure(facecolor='w', figsize=(1.5 * n, 3.2))
    gs = gridspec.GridSpec(2, n)
    for b in range(n):
        ax = fig.add_subplot(gs[0, b])
        ax.imshow(numpy.clip(blocks[b, blocks.shape[1] // 2], 0.0, 1.0))
        disable_axis(ax)
        ax = fig.add_subplot(gs[1, b])
        ax.imshow(maps[b], cmap='gray', vmin=0.0, vmax=maps.max(), interpolation='nearest')
        disable_axis(ax)
    if title:
        fig.suptitle(title)
    fig.savefig(path)
    plt.close(fig)
