from django.conf import settings
from django.db import models
from django.db.models.signals import post_save
from django.dispatch import receiver
from rest_framework.authtoken.models import Token


@receiver(post_save, sender=settings.AUTH_USER_MODEL)
def create_auth_token(sender, instance=None, created=False, **kwargs):
    if created:
        Token.objects.create(user=instance)


class Run(models.Model):
    SUCCEEDED = 'succeeded'
    FAILED = 'failed'
    STATUS_CHOICES = ((SUCCEEDED, 'succeeded'), (FAILED, 'failed'))

    created = models.DateTimeField(auto_now_add=True)
    command = models.CharField(max_length=32)
    config = models.JSONField(default=dict)
    config_hash = models.CharField(max_length=64)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default=SUCCEEDED)
    summary = models.JSONField(null=True, blank=True)
    error = models.TextField(null=True, blank=True)
    owner = models.ForeignKey('auth.User', related_name='runs', on_delete=models.CASCADE)

    class Meta:
        ordering = ('-created',)

    def __str__(self):
        return f'{self.command} {self.config_hash[:12]} ({self.status})'
