import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class Visualizer(object):
    """
    Figures of training curves and probe reports, written to image files.
    """

    def __init__(self, figsize=(6, 4), dpi=100):
        self.figsize = figsize
        self.dpi = dpi

    def _save(self, fig, output_name):
        fig.tight_layout()
        fig.savefig(output_name, dpi=self.dpi)
        plt.close(fig)

    def plot_training_log(self, log, output_name):
        """
        Mean loss per epoch, with dev accuracy on a second axis when logged.

        :param log: List of epoch entries (TrainResult.log or a parsed
            JSON-lines log).
        :param output_name: Image file.
        """
        if not log:
            raise ValueError("Empty training log")
        epochs = [entry["epoch"] for entry in log]
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.plot(epochs, [entry["mean_loss"] for entry in log], marker="o", label="mean loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("contrastive loss")
        dev = [(entry["epoch"], entry["dev_accuracy"]) for entry in log
               if "dev_accuracy" in entry]
        if dev:
            ax2 = ax.twinx()
            ax2.plot(*zip(*dev), marker="s", color="tab:orange", label="dev top-1")
            ax2.set_ylabel("dev top-1 accuracy")
            ax2.set_ylim(0, 1)
        self._save(fig, output_name)

    def plot_probe_report(self, reports, output_name):
        """
        Baseline and probed accuracy per dataset, one bar group per dataset.

        :param reports: ProbeReports over the same datasets.
        :param output_name: Image file.
        """
        if not reports:
            raise ValueError("No probe reports to plot")
        names = [d["name"] for d in reports[0].datasets]
        x = np.arange(len(names))
        width = 0.8 / (len(reports) + 1)
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.bar(x, [d["baseline"] for d in reports[0].datasets], width, label="baseline")
        for i, report in enumerate(reports, 1):
            label = "{} {}={}".format(report.probe, "n" if report.probe == "shuffle" else "w",
                                      report.param)
            if report.avg_percent_change is not None:
                label += " ({:+.2f}%)".format(report.avg_percent_change)
            ax.bar(x + i * width, [d["probed"] for d in report.datasets], width,
                   label=label)
        ax.set_xticks(x + width * len(reports) / 2.0)
        ax.set_xticklabels(names)
        ax.set_ylabel("top-1 accuracy")
        ax.set_ylim(0, 1)
        ax.legend(fontsize="small")
        self._save(fig, output_name)


def plot_training_log(log, output_name):
    Visualizer().plot_training_log(log, output_name)


def plot_probe_report(reports, output_name):
    Visualizer().plot_probe_report(reports, output_name)
