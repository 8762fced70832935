from django.apps import AppConfig


class WalkappConfig(AppConfig):
    name = 'walkapp'
    verbose_name = 'Quantum walk lab'
