"""QuantumWalkLab URL Configuration

The run registry lives under the walkapp urls; the browsable API login views
are mounted under ``api-auth/``.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('', include('walkapp.urls')),
    path('api-auth/', include('rest_framework.urls')),
]
