from django.contrib import admin

from walkapp.models import Run


@admin.register(Run)
class RunAdmin(admin.ModelAdmin):
    list_display = ('id', 'command', 'status', 'owner', 'created')
    list_filter = ('command', 'status')
    readonly_fields = ('config_hash', 'created')
