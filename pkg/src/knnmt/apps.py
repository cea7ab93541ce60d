from django.apps import AppConfig


class KnnMtConfig(AppConfig):
    name = "knnmt"
    verbose_name = "kNN-MT diversified decoding"
