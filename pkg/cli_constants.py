LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

EXIT_OK = 0
EXIT_FAILURE = 1

SUMMARY_CSV = "summary.csv"
SUMMARY_TXT = "summary.txt"
SUMMARY_HEADER = ("modality", "correct", "total", "accuracy")

CONFUSION_CSV = "{modality}_confusion.csv"
CONFUSION_TXT = "{modality}_confusion.txt"
METRICS_CSV = "{modality}_metrics.csv"
DISTANCES_CSV = "{modality}_distances.csv"
EIGENVALUES_SUFFIX = ".eigenvalues.csv"
