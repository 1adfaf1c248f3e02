"""Names of built-in scoring algorithms recognized by the query language."""

PROXY_METHODS = ("CosineNN", "EuclideanNN", "Linear", "LEEP")
ACCURACY_METHODS = ("CosineNN", "EuclideanNN", "Linear")

# query-level name -> default distance metric over task embeddings
DATASIM_METRICS = {"Task2Vec": "asymmetric_cos", "TaskCosine": "cosine"}

SCORING_NAMES = frozenset(PROXY_METHODS) | frozenset(DATASIM_METRICS)
